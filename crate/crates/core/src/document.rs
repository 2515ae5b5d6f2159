//! IRP and SOP documents.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::flowchart::Flowchart;
use crate::ids::DocId;
use crate::version::Version;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DocKind {
    #[serde(rename = "IRP")]
    Irp,
    #[serde(rename = "SOP")]
    Sop,
}

impl DocKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DocKind::Irp => "IRP",
            DocKind::Sop => "SOP",
        }
    }
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DocKind {
    type Err = DocError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IRP" => Ok(DocKind::Irp),
            "SOP" => Ok(DocKind::Sop),
            other => Err(DocError::UnknownKind(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocError {
    #[error("unknown document kind `{0}` (expected IRP or SOP)")]
    UnknownKind(String),
    #[error("`{0}` is listed more than once in references")]
    DuplicateReference(DocId),
    #[error("document `{0}` references itself")]
    SelfReference(DocId),
    #[error("flowchart node `{node}` refers to `{doc}`, which is missing from references")]
    UnlistedNodeRef { node: String, doc: DocId },
    #[error("{field} must be a non-empty single line")]
    BadField { field: &'static str },
    #[error("tech-context entry `{0}` must be non-empty, trimmed and free of commas")]
    BadTechContext(String),
    #[error("a body followed by a flowchart must end with a newline")]
    UnterminatedBody,
}

/// An incident response plan or standard operating procedure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaybookDoc {
    pub id: DocId,
    pub kind: DocKind,
    pub title: String,
    pub version: Version,
    pub owner: String,
    #[serde(default)]
    pub references: Vec<DocId>,
    /// Markdown body, excluding the front-matter and the flowchart block.
    #[serde(default)]
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flowchart: Option<Flowchart>,
    /// Platforms and products the document applies to.
    #[serde(
        default,
        rename = "tech_context",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub tech_context: Vec<String>,
}

fn header_value_ok(s: &str) -> bool {
    !s.is_empty() && s.trim() == s && !s.contains(['\n', '\r'])
}

impl PlaybookDoc {
    /// Checks the document-level invariants that cannot be expressed in the
    /// field types.
    pub fn validate(&self) -> Result<(), DocError> {
        if !header_value_ok(&self.title) {
            return Err(DocError::BadField { field: "title" });
        }
        if !header_value_ok(&self.owner) {
            return Err(DocError::BadField { field: "owner" });
        }
        let mut seen = BTreeSet::new();
        for reference in &self.references {
            if *reference == self.id {
                return Err(DocError::SelfReference(reference.clone()));
            }
            if !seen.insert(reference) {
                return Err(DocError::DuplicateReference(reference.clone()));
            }
        }
        for entry in &self.tech_context {
            if !header_value_ok(entry) || entry.contains(',') {
                return Err(DocError::BadTechContext(entry.clone()));
            }
        }
        if let Some(chart) = &self.flowchart {
            if !self.body.is_empty() && !self.body.ends_with('\n') {
                return Err(DocError::UnterminatedBody);
            }
            for node in chart.nodes() {
                if let Some(doc) = &node.doc_ref {
                    if !seen.contains(doc) {
                        return Err(DocError::UnlistedNodeRef {
                            node: node.id.as_str().into(),
                            doc: doc.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_irp(&self) -> bool {
        self.kind == DocKind::Irp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn doc(refs: &[&str]) -> PlaybookDoc {
        PlaybookDoc {
            id: DocId::new("irp_a").unwrap(),
            kind: DocKind::Irp,
            title: "A".into(),
            version: Version::new(1, 0, 0, NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()),
            owner: "sec".into(),
            references: refs.iter().map(|r| DocId::new(*r).unwrap()).collect(),
            body: String::new(),
            flowchart: None,
            tech_context: Vec::new(),
        }
    }

    #[test]
    fn reference_invariants() {
        assert_eq!(doc(&["sop_1", "sop_2"]).validate(), Ok(()));
        assert!(matches!(
            doc(&["sop_1", "sop_1"]).validate(),
            Err(DocError::DuplicateReference(_))
        ));
        assert!(matches!(
            doc(&["irp_a"]).validate(),
            Err(DocError::SelfReference(_))
        ));
    }

    #[test]
    fn header_fields_must_be_single_trimmed_lines() {
        let mut d = doc(&[]);
        d.title = " padded".into();
        assert_eq!(d.validate(), Err(DocError::BadField { field: "title" }));
        let mut d = doc(&[]);
        d.tech_context = alloc::vec!["a,b".into()];
        assert!(matches!(d.validate(), Err(DocError::BadTechContext(_))));
    }
}
