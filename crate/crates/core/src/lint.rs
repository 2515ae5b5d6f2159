//! Repository-wide lint: reference integrity, cycles, staleness and the
//! per-document flowchart checks.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::analysis::analyze_flowchart;
use crate::document::PlaybookDoc;
use crate::graph::{build_ref_graph, detect_cycles};
use crate::ids::DocId;

/// Review age after which a document is reported stale.
pub const DEFAULT_STALE_AFTER_DAYS: u32 = 180;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "ERROR",
            Severity::Warning => "WARNING",
            Severity::Info => "INFO",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! finding_codes {
    ($($variant:ident => $severity:ident),* $(,)?) => {
        /// Finding classes; variants are declared in name order so the derived
        /// ordering matches the textual one.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum FindingCode {
            $($variant),*
        }

        impl FindingCode {
            pub fn as_str(self) -> &'static str {
                match self {
                    $(FindingCode::$variant => stringify!($variant)),*
                }
            }

            pub fn severity(self) -> Severity {
                match self {
                    $(FindingCode::$variant => Severity::$severity),*
                }
            }
        }

        impl FromStr for FindingCode {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($variant) => Ok(FindingCode::$variant),)*
                    other => Err(alloc::format!("unknown finding code `{other}`")),
                }
            }
        }
    };
}

finding_codes! {
    Cycle => Error,
    CyclicFlow => Error,
    DanglingRef => Error,
    DeadEnd => Error,
    DuplicateDocId => Error,
    NondeterministicBranch => Error,
    ParallelFork => Info,
    ParseError => Error,
    ReadError => Error,
    Stale => Warning,
    UnreachableNode => Error,
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub severity: Severity,
    pub code: FindingCode,
    /// Document id, or a file path for findings about unparseable files.
    pub doc: String,
    pub detail: String,
}

impl LintFinding {
    pub fn new(code: FindingCode, doc: impl Into<String>, detail: impl Into<String>) -> Self {
        LintFinding {
            severity: code.severity(),
            code,
            doc: doc.into(),
            detail: detail.into(),
        }
    }

    fn sort_key(&self) -> (&str, &str, &str) {
        (&self.doc, self.code.as_str(), &self.detail)
    }
}

impl fmt::Display for LintFinding {
    /// `SEVERITY CODE doc: detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: {}",
            self.severity, self.code, self.doc, self.detail
        )
    }
}

/// Findings kept sorted by (doc, code, detail).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    findings: Vec<LintFinding>,
}

impl LintReport {
    pub fn new(findings: impl IntoIterator<Item = LintFinding>) -> Self {
        let mut report = LintReport::default();
        report.extend(findings);
        report
    }

    pub fn extend(&mut self, findings: impl IntoIterator<Item = LintFinding>) {
        self.findings.extend(findings);
        self.findings
            .sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        self.findings.dedup();
    }

    pub fn findings(&self) -> &[LintFinding] {
        &self.findings
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &LintFinding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn count(&self, severity: Severity) -> usize {
        self.findings
            .iter()
            .filter(|f| f.severity == severity)
            .count()
    }

    /// One `SEVERITY CODE doc: detail` line per finding.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for finding in &self.findings {
            out.push_str(&alloc::format!("{finding}\n"));
        }
        out
    }
}

/// Lints a set of documents as one repository.
pub fn lint_repository(
    docs: &[PlaybookDoc],
    today: NaiveDate,
    stale_after_days: u32,
) -> LintReport {
    let mut findings = Vec::new();

    let mut seen = BTreeSet::new();
    let mut unique = Vec::with_capacity(docs.len());
    for doc in docs {
        if seen.insert(&doc.id) {
            unique.push(doc.clone());
        } else {
            findings.push(LintFinding::new(
                FindingCode::DuplicateDocId,
                doc.id.as_str(),
                "document id is used by more than one document",
            ));
        }
    }

    let graph = build_ref_graph(&unique).expect("ids deduplicated above");
    for phantom in graph.phantoms() {
        for referrer in graph.referrers(phantom) {
            findings.push(LintFinding::new(
                FindingCode::DanglingRef,
                referrer.as_str(),
                alloc::format!("{phantom}: referenced document does not exist"),
            ));
        }
    }
    for cycle in detect_cycles(&graph) {
        let mut path: Vec<&str> = cycle.iter().map(DocId::as_str).collect();
        path.push(cycle[0].as_str());
        findings.push(LintFinding::new(
            FindingCode::Cycle,
            cycle[0].as_str(),
            alloc::format!("reference cycle {}", path.join(" -> ")),
        ));
    }

    for doc in &unique {
        let age = doc.version.days_since_review(today);
        if age > i64::from(stale_after_days) {
            findings.push(LintFinding::new(
                FindingCode::Stale,
                doc.id.as_str(),
                alloc::format!(
                    "last reviewed {} ({age} days ago, limit {stale_after_days})",
                    doc.version.reviewed
                ),
            ));
        }
        if let Some(chart) = &doc.flowchart {
            for finding in analyze_flowchart(chart).findings {
                findings.push(LintFinding::new(
                    finding.code,
                    doc.id.as_str(),
                    finding.detail,
                ));
            }
        }
    }

    LintReport::new(findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::DocKind;
    use crate::version::Version;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn doc(id: &str, refs: &[&str], reviewed: NaiveDate) -> PlaybookDoc {
        PlaybookDoc {
            id: DocId::new(id).unwrap(),
            kind: DocKind::Irp,
            title: id.into(),
            version: Version::new(1, 0, 0, reviewed),
            owner: "sec".into(),
            references: refs.iter().map(|r| DocId::new(*r).unwrap()).collect(),
            body: String::new(),
            flowchart: None,
            tech_context: Vec::new(),
        }
    }

    #[test]
    fn stale_after_a_leap_year() {
        let report = lint_repository(
            &[doc("sop_a", &[], date(2024, 1, 7))],
            date(2025, 1, 7),
            180,
        );
        assert_eq!(report.findings().len(), 1);
        let finding = &report.findings()[0];
        assert_eq!(finding.code, FindingCode::Stale);
        assert_eq!(finding.severity, Severity::Warning);
        assert!(finding.detail.contains("366 days"));
    }

    #[test]
    fn not_stale_at_exact_limit() {
        let report = lint_repository(
            &[doc("sop_a", &[], date(2024, 1, 1))],
            date(2024, 6, 29),
            180,
        );
        assert!(report.is_empty());
    }

    #[test]
    fn dangling_reference() {
        let today = date(2024, 1, 1);
        let report = lint_repository(&[doc("irp_a", &["sop_9"], today)], today, 180);
        assert_eq!(
            report.to_text(),
            "ERROR DanglingRef irp_a: sop_9: referenced document does not exist\n"
        );
    }

    #[test]
    fn cycles_and_duplicates() {
        let today = date(2024, 1, 1);
        let report = lint_repository(
            &[
                doc("b", &["a"], today),
                doc("a", &["b"], today),
                doc("a", &[], today),
            ],
            today,
            180,
        );
        let codes: Vec<_> = report.findings().iter().map(|f| f.code).collect();
        assert_eq!(codes, [FindingCode::Cycle, FindingCode::DuplicateDocId]);
        assert!(report.findings()[0].detail.ends_with("a -> b -> a"));
    }

    #[test]
    fn codes_round_trip_through_names() {
        for code in [
            FindingCode::Cycle,
            FindingCode::UnreachableNode,
            FindingCode::ParallelFork,
        ] {
            assert_eq!(code.as_str().parse::<FindingCode>(), Ok(code));
        }
    }
}
