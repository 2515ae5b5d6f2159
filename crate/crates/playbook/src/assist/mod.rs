//! LLM assistance: SOP enumeration, prioritization, IRP drafting, gap
//! analysis and post-mortem commentary.
//!
//! Every operation renders a versioned prompt template, sends it to a
//! [`Provider`], and parses the free-text answer into typed results. Answers
//! that cannot be read, or that name items the caller never offered, fail
//! with [`AssistError::UnparseableResponse`] carrying the raw text.

pub mod config;
pub mod parse;
pub mod provider;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use chrono::NaiveDate;
use playbook_core::{DocId, DocKind, IncidentSession, PlaybookDoc, Version};
use serde::{Deserialize, Serialize};

pub use config::ProviderConfig;
pub use provider::{
    FixtureProvider, HttpProvider, PromptRequest, Provider, RecordingProvider, StaticProvider,
};

use crate::export::export_log;
use parse::{lines, list_items, section_heading, Line, ListItem};

pub const ENUMERATE_TEMPLATE: &str = "enumerate_sops.v1";
pub const PRIORITIZE_TEMPLATE: &str = "prioritize.v1";
pub const DRAFT_TEMPLATE: &str = "draft_irp.v1";
pub const GAPS_TEMPLATE: &str = "gap_analysis.v1";
pub const POSTMORTEM_TEMPLATE: &str = "postmortem.v1";

fn template_text(id: &str) -> &'static str {
    match id {
        ENUMERATE_TEMPLATE => include_str!("../../templates/enumerate_sops.txt"),
        PRIORITIZE_TEMPLATE => include_str!("../../templates/prioritize.txt"),
        DRAFT_TEMPLATE => include_str!("../../templates/draft_irp.txt"),
        GAPS_TEMPLATE => include_str!("../../templates/gap_analysis.txt"),
        POSTMORTEM_TEMPLATE => include_str!("../../templates/postmortem.txt"),
        other => unreachable!("unknown template {other}"),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AssistError {
    #[error("provider did not answer: {0}")]
    ProviderTimeout(String),
    #[error("could not read the model response: {reason}")]
    UnparseableResponse { reason: String, raw: String },
    #[error("asked for {requested} proposal(s) but only {available} were given")]
    NotEnoughProposals { requested: usize, available: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no fixture for `{template}` at {}", .path.display())]
    MissingFixture { template: String, path: PathBuf },
    #[error("provider error: {0}")]
    Provider(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

impl AssistError {
    pub fn code(&self) -> &'static str {
        match self {
            AssistError::ProviderTimeout(_) => "ProviderTimeout",
            AssistError::UnparseableResponse { .. } => "UnparseableResponse",
            AssistError::NotEnoughProposals { .. } => "NotEnoughProposals",
            AssistError::InvalidRequest(_) => "InvalidRequest",
            AssistError::MissingFixture { .. } => "MissingFixture",
            AssistError::Provider(_) => "ProviderError",
            AssistError::Config(_) => "ProviderConfig",
        }
    }

    /// The raw model text, when the failure was in reading it.
    pub fn raw(&self) -> Option<&str> {
        match self {
            AssistError::UnparseableResponse { raw, .. } => Some(raw),
            _ => None,
        }
    }
}

fn unparseable(reason: impl Into<String>, raw: &str) -> AssistError {
    AssistError::UnparseableResponse {
        reason: reason.into(),
        raw: raw.to_string(),
    }
}

/// Organization details used to target prompts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssistContext {
    pub tech_stack: Vec<String>,
    pub compliance: Vec<String>,
    pub org_notes: Option<String>,
}

impl AssistContext {
    pub fn is_empty(&self) -> bool {
        self.tech_stack.iter().all(|s| s.trim().is_empty())
            && self.compliance.iter().all(|s| s.trim().is_empty())
            && self
                .org_notes
                .as_deref()
                .is_none_or(|s| s.trim().is_empty())
    }

    fn render(&self) -> String {
        let list = |items: &[String]| {
            items
                .iter()
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = Vec::new();
        let tech = list(&self.tech_stack);
        if !tech.is_empty() {
            out.push(format!("Technology in use: {tech}."));
        }
        let compliance = list(&self.compliance);
        if !compliance.is_empty() {
            out.push(format!("Compliance requirements: {compliance}."));
        }
        if let Some(notes) = self
            .org_notes
            .as_deref()
            .map(str::trim)
            .filter(|s| !s.is_empty())
        {
            out.push(format!("Notes about our organization: {notes}"));
        }
        out.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SopProposal {
    pub title: String,
    pub description: String,
}

impl SopProposal {
    pub fn new(title: impl Into<String>, description: impl Into<String>) -> Self {
        SopProposal {
            title: title.into(),
            description: description.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedProposal {
    pub proposal: SopProposal,
    pub rank: usize,
    pub rationale: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Postmortem {
    pub commentary: Vec<String>,
    pub recommendations: Vec<String>,
}

/// A parsed result together with the model text it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assisted<T> {
    pub value: T,
    pub raw: String,
}

fn render(template_id: &'static str, vars: &[(&str, &str)]) -> PromptRequest {
    let mut prompt = template_text(template_id).to_string();
    for (key, value) in vars {
        prompt = prompt.replace(&format!("{{{{{key}}}}}"), value);
    }
    debug_assert!(
        !prompt.contains("{{"),
        "unfilled placeholder in {template_id}"
    );
    PromptRequest {
        template_id,
        prompt,
    }
}

fn bullet_list(proposals: &[SopProposal]) -> String {
    proposals
        .iter()
        .map(|p| {
            if p.description.is_empty() {
                format!("- **{}**", p.title)
            } else {
                format!("- **{}**: {}", p.title, p.description)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn check_unique_titles(proposals: &[SopProposal]) -> Result<(), AssistError> {
    let mut seen = BTreeSet::new();
    for p in proposals {
        if p.title.trim().is_empty() {
            return Err(AssistError::InvalidRequest(
                "proposal titles must be non-empty".into(),
            ));
        }
        if !seen.insert(p.title.as_str()) {
            return Err(AssistError::InvalidRequest(format!(
                "duplicate proposal `{}`",
                p.title
            )));
        }
    }
    Ok(())
}

/// Prompt builders. Public so fixture tooling can compute fixture keys
/// without calling a provider.
pub mod requests {
    use super::*;

    pub fn enumerate(ctx: &AssistContext) -> Result<PromptRequest, AssistError> {
        if ctx.is_empty() {
            return Err(AssistError::InvalidRequest(
                "describe the environment (tech stack, compliance or notes)".into(),
            ));
        }
        Ok(render(ENUMERATE_TEMPLATE, &[("context", &ctx.render())]))
    }

    pub fn prioritize(
        proposals: &[SopProposal],
        n: usize,
        ctx: &AssistContext,
    ) -> Result<PromptRequest, AssistError> {
        if n == 0 {
            return Err(AssistError::InvalidRequest("n must be at least 1".into()));
        }
        if n > proposals.len() {
            return Err(AssistError::NotEnoughProposals {
                requested: n,
                available: proposals.len(),
            });
        }
        check_unique_titles(proposals)?;
        Ok(render(
            PRIORITIZE_TEMPLATE,
            &[
                ("context", &ctx.render()),
                ("proposals", &bullet_list(proposals)),
                ("n", &n.to_string()),
            ],
        ))
    }

    pub fn draft(scenario: &str, ctx: &AssistContext) -> Result<PromptRequest, AssistError> {
        let scenario = scenario.trim();
        if scenario.is_empty() {
            return Err(AssistError::InvalidRequest(
                "scenario must be non-empty".into(),
            ));
        }
        Ok(render(
            DRAFT_TEMPLATE,
            &[("scenario", scenario), ("context", &ctx.render())],
        ))
    }

    pub fn gaps(
        existing: &[PlaybookDoc],
        candidates: &[SopProposal],
        ctx: &AssistContext,
    ) -> Result<PromptRequest, AssistError> {
        if candidates.is_empty() {
            return Err(AssistError::NotEnoughProposals {
                requested: 1,
                available: 0,
            });
        }
        check_unique_titles(candidates)?;
        let existing = if existing.is_empty() {
            "(none)".to_string()
        } else {
            existing
                .iter()
                .map(|d| format!("- {} ({})", d.title, d.id))
                .collect::<Vec<_>>()
                .join("\n")
        };
        Ok(render(
            GAPS_TEMPLATE,
            &[
                ("existing", &existing),
                ("candidates", &bullet_list(candidates)),
                ("context", &ctx.render()),
            ],
        ))
    }

    pub fn postmortem(
        session: &IncidentSession,
        ctx: &AssistContext,
    ) -> Result<PromptRequest, AssistError> {
        if session.log.is_empty() {
            return Err(AssistError::InvalidRequest(
                "the incident log is empty".into(),
            ));
        }
        Ok(render(
            POSTMORTEM_TEMPLATE,
            &[("context", &ctx.render()), ("log", &export_log(session))],
        ))
    }
}

/// Runs the assistance operations against one provider.
#[derive(Clone)]
pub struct Assistant {
    provider: Arc<dyn Provider>,
    timeout: Duration,
}

impl Assistant {
    pub fn new(provider: Arc<dyn Provider>, timeout: Duration) -> Self {
        Assistant { provider, timeout }
    }

    pub fn from_config(config: &ProviderConfig) -> Result<Self, AssistError> {
        Ok(Assistant::new(config.build()?, config.timeout()))
    }

    async fn ask(&self, request: &PromptRequest) -> Result<String, AssistError> {
        match tokio::time::timeout(self.timeout, self.provider.complete(request)).await {
            Ok(result) => result,
            Err(_) => Err(AssistError::ProviderTimeout(format!(
                "no answer within {}s",
                self.timeout.as_secs_f64()
            ))),
        }
    }

    pub async fn enumerate_sops(
        &self,
        ctx: &AssistContext,
    ) -> Result<Assisted<Vec<SopProposal>>, AssistError> {
        let raw = self.ask(&requests::enumerate(ctx)?).await?;
        let value = parse_proposals(&raw)?;
        Ok(Assisted { value, raw })
    }

    pub async fn prioritize(
        &self,
        proposals: &[SopProposal],
        n: usize,
        ctx: &AssistContext,
    ) -> Result<Assisted<Vec<RankedProposal>>, AssistError> {
        let raw = self.ask(&requests::prioritize(proposals, n, ctx)?).await?;
        let mut ranked = parse_ranked(&raw, proposals)?;
        if ranked.len() < n {
            return Err(unparseable(
                format!("expected {n} ranked item(s), found {}", ranked.len()),
                &raw,
            ));
        }
        ranked.truncate(n);
        Ok(Assisted { value: ranked, raw })
    }

    /// Drafts an IRP at version `0.1.0.<today>` with id `irp_<slug>-draft`.
    pub async fn draft_irp(
        &self,
        scenario: &str,
        ctx: &AssistContext,
        today: NaiveDate,
    ) -> Result<Assisted<PlaybookDoc>, AssistError> {
        let request = requests::draft(scenario, ctx)?;
        let id = draft_id(scenario)?;
        let raw = self.ask(&request).await?;
        let sections = parse_sections(&raw)?;
        let title = draft_title(scenario);
        let doc = PlaybookDoc {
            id,
            kind: DocKind::Irp,
            title: title.clone(),
            version: Version::new(0, 1, 0, today),
            owner: "Unassigned".into(),
            references: Vec::new(),
            body: render_draft_body(&title, &sections),
            flowchart: None,
            tech_context: ctx
                .tech_stack
                .iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty() && !s.contains([',', '\n', '\r']))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        doc.validate()
            .map_err(|e| unparseable(format!("draft is not a valid document: {e}"), &raw))?;
        Ok(Assisted { value: doc, raw })
    }

    /// Ranks the candidates; equal ranks are ordered by title.
    pub async fn gap_analysis(
        &self,
        existing: &[PlaybookDoc],
        candidates: &[SopProposal],
        ctx: &AssistContext,
    ) -> Result<Assisted<Vec<RankedProposal>>, AssistError> {
        let raw = self
            .ask(&requests::gaps(existing, candidates, ctx)?)
            .await?;
        let value = parse_ranked(&raw, candidates)?;
        Ok(Assisted { value, raw })
    }

    pub async fn postmortem_commentary(
        &self,
        session: &IncidentSession,
        ctx: &AssistContext,
    ) -> Result<Assisted<Postmortem>, AssistError> {
        let raw = self.ask(&requests::postmortem(session, ctx)?).await?;
        let value = parse_postmortem(&raw)?;
        Ok(Assisted { value, raw })
    }
}

/// Lower-case alphanumeric runs joined by `_`.
fn slug(text: &str) -> String {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

pub fn draft_id(scenario: &str) -> Result<DocId, AssistError> {
    let mut slug = slug(scenario);
    if slug.len() > 40 {
        slug.truncate(40);
        slug = slug.trim_end_matches('_').to_string();
    }
    if slug.is_empty() {
        return Err(AssistError::InvalidRequest(
            "scenario needs at least one letter or digit".into(),
        ));
    }
    DocId::new(format!("irp_{slug}-draft")).map_err(|e| AssistError::InvalidRequest(e.to_string()))
}

fn draft_title(scenario: &str) -> String {
    let flat = scenario.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut chars = flat.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => flat,
    }
}

pub fn parse_proposals(raw: &str) -> Result<Vec<SopProposal>, AssistError> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    let items = list_items(raw);
    if items.is_empty() {
        return Err(unparseable("no list items found", raw));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for item in items {
        if item.title.is_empty() {
            return Err(unparseable("a list item has no title", raw));
        }
        if seen.insert(item.title.clone()) {
            out.push(SopProposal::new(item.title, item.detail));
        }
    }
    Ok(out)
}

/// Matches each listed title against `pool`, orders by (stated rank, title)
/// and renumbers 1..n.
pub fn parse_ranked(raw: &str, pool: &[SopProposal]) -> Result<Vec<RankedProposal>, AssistError> {
    let items = list_items(raw);
    if items.is_empty() {
        return Err(unparseable("no ranked items found", raw));
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for (position, item) in items.iter().enumerate() {
        let proposal = pool
            .iter()
            .find(|p| p.title == item.title)
            .or_else(|| {
                pool.iter()
                    .find(|p| p.title.trim().eq_ignore_ascii_case(item.title.trim()))
            })
            .ok_or_else(|| {
                unparseable(format!("`{}` was not among the inputs", item.title), raw)
            })?;
        if !seen.insert(proposal.title.clone()) {
            return Err(unparseable(
                format!("`{}` is ranked twice", proposal.title),
                raw,
            ));
        }
        if item.detail.is_empty() {
            return Err(unparseable(
                format!("`{}` has no rationale", proposal.title),
                raw,
            ));
        }
        let stated = item.number.map_or(position + 1, |n| n as usize);
        rows.push((stated, proposal.clone(), item.detail.clone()));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.title.cmp(&b.1.title)));
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (_, proposal, rationale))| RankedProposal {
            proposal,
            rank: i + 1,
            rationale,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DraftSection {
    pub number: u32,
    pub heading: String,
    pub description: String,
    pub actions: Vec<String>,
}

fn is_label(text: &str, label: &str) -> Option<String> {
    let lower = text.to_lowercase();
    lower.starts_with(label).then(|| {
        text[label.len()..]
            .trim_start_matches(':')
            .trim()
            .to_string()
    })
}

pub fn parse_sections(raw: &str) -> Result<Vec<DraftSection>, AssistError> {
    let mut sections: Vec<DraftSection> = Vec::new();
    let open = |sections: &mut Vec<DraftSection>, number: u32, heading: String| {
        sections.push(DraftSection {
            number,
            heading,
            description: String::new(),
            actions: Vec::new(),
        })
    };
    for line in lines(raw) {
        match line {
            Line::Item(ListItem {
                number: Some(n),
                text,
                ..
            }) => open(&mut sections, n, text),
            Line::Item(ListItem { text, .. }) => {
                if let Some(section) = sections.last_mut() {
                    section.actions.push(text);
                }
            }
            Line::Text { text, .. } => {
                if let Some((n, heading)) = section_heading(&text) {
                    open(&mut sections, n, heading);
                } else if let Some(section) = sections.last_mut() {
                    if let Some(desc) = is_label(&text, "description") {
                        section.description = desc;
                    }
                }
            }
        }
    }
    if sections.is_empty() {
        return Err(unparseable("no numbered sections found", raw));
    }
    for (i, section) in sections.iter().enumerate() {
        if section.number as usize != i + 1 {
            return Err(unparseable(
                format!("section {} is out of sequence", section.number),
                raw,
            ));
        }
        if section.actions.is_empty() {
            return Err(unparseable(
                format!("section {} lists no actions", section.number),
                raw,
            ));
        }
    }
    Ok(sections)
}

fn render_draft_body(title: &str, sections: &[DraftSection]) -> String {
    let mut body = format!(
        "# {title}\n\nDraft outline produced with LLM assistance. Review every section, \
         link the supporting SOPs and add a flowchart before use.\n"
    );
    for s in sections {
        body.push_str(&format!("\n## {}. {}\n\n", s.number, s.heading));
        if !s.description.is_empty() {
            body.push_str(&s.description);
            body.push_str("\n\n");
        }
        for action in &s.actions {
            body.push_str(&format!("- {action}\n"));
        }
    }
    body
}

fn remark(item: &ListItem) -> String {
    if item.detail.is_empty() {
        item.title.clone()
    } else {
        format!("{}: {}", item.title, item.detail)
    }
}

/// Numbered items before a "Recommendations" heading are commentary, items
/// after it recommendations. Without the heading, numbered items are
/// commentary and bulleted ones recommendations.
pub fn parse_postmortem(raw: &str) -> Result<Postmortem, AssistError> {
    let parsed = lines(raw);
    let is_heading = |text: &str| {
        text.len() <= 40
            && text
                .to_lowercase()
                .trim_end_matches(':')
                .contains("recommendation")
    };
    let has_heading = parsed
        .iter()
        .any(|l| matches!(l, Line::Text { text, .. } if is_heading(text)));
    let mut out = Postmortem::default();
    let mut after_heading = false;
    for line in &parsed {
        match line {
            Line::Text { text, .. } if is_heading(text) => after_heading = true,
            Line::Text { .. } => {}
            Line::Item(item) => {
                if item.title.is_empty() {
                    return Err(unparseable("a list item has no title", raw));
                }
                let recommendation = if has_heading {
                    after_heading
                } else {
                    item.number.is_none()
                };
                if recommendation {
                    out.recommendations.push(remark(item));
                } else {
                    out.commentary.push(remark(item));
                }
            }
        }
    }
    if out.commentary.is_empty() {
        return Err(unparseable("no commentary items found", raw));
    }
    Ok(out)
}
