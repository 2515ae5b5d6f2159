//! Incident sessions: a live run of an IRP's flowchart with its event log.
//!
//! Every transition here is a pure function of the session, the chart and
//! the instant supplied by the caller; persistence and clocks live in the
//! service layer.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::analysis::ChartReport;
use crate::document::PlaybookDoc;
use crate::execution::{advance, start_execution, ExecError, Frontier};
use crate::flowchart::{Flowchart, NodeKind};
use crate::ids::{DocId, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidentEvent {
    pub timestamp: DateTime<FixedOffset>,
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionStatus {
    Active,
    Complete,
    Aborted,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Active => "Active",
            SessionStatus::Complete => "Complete",
            SessionStatus::Aborted => "Aborted",
        }
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("`{0}` is not an IRP")]
    NotAnIrp(DocId),
    #[error("`{0}` has no flowchart to execute")]
    MissingFlowchart(DocId),
    #[error("the flowchart has {} analysis error(s)", .0.errors().count())]
    IncompleteChart(ChartReport),
    #[error("session is {0}, not Active")]
    SessionNotActive(SessionStatus),
    #[error("a note-only event needs non-empty text")]
    EmptyNote,
    #[error("a branch label was given without a node")]
    DecisionWithoutNode,
    #[error("event time {got} is earlier than the previous event at {last}")]
    ClockRegression {
        last: DateTime<FixedOffset>,
        got: DateTime<FixedOffset>,
    },
    #[error(transparent)]
    Exec(ExecError),
}

impl From<ExecError> for SessionError {
    fn from(err: ExecError) -> Self {
        match err {
            ExecError::IncompleteChart(report) => SessionError::IncompleteChart(report),
            other => SessionError::Exec(other),
        }
    }
}

impl SessionError {
    /// Stable machine-readable name of the error.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::NotAnIrp(_) => "NotAnIrp",
            SessionError::MissingFlowchart(_) => "MissingFlowchart",
            SessionError::IncompleteChart(_) => "IncompleteChart",
            SessionError::SessionNotActive(_) => "SessionNotActive",
            SessionError::EmptyNote => "EmptyNote",
            SessionError::DecisionWithoutNode => "DecisionWithoutNode",
            SessionError::ClockRegression { .. } => "ClockRegression",
            SessionError::Exec(e) => e.code(),
        }
    }
}

/// One step requested by a responder.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRequest {
    /// Node whose token moves; `None` records a note only.
    #[serde(default)]
    pub node: Option<String>,
    #[serde(default)]
    pub decision: Option<String>,
    #[serde(default)]
    pub note: String,
    pub actor: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidentSession {
    pub session_id: String,
    pub irp: DocId,
    pub irp_title: String,
    pub started: DateTime<FixedOffset>,
    pub status: SessionStatus,
    pub frontier: Frontier,
    /// Whether any token has been absorbed by an end node.
    pub reached_end: bool,
    pub log: Vec<IncidentEvent>,
}

impl IncidentSession {
    /// Opens a session on `irp`, placing the initial tokens and logging the
    /// initiation event.
    pub fn open(
        session_id: impl Into<String>,
        irp: &PlaybookDoc,
        actor: &str,
        now: DateTime<FixedOffset>,
    ) -> Result<IncidentSession, SessionError> {
        if !irp.is_irp() {
            return Err(SessionError::NotAnIrp(irp.id.clone()));
        }
        let chart = irp
            .flowchart
            .as_ref()
            .ok_or_else(|| SessionError::MissingFlowchart(irp.id.clone()))?;
        let frontier = start_execution(chart)?;
        Ok(IncidentSession {
            session_id: session_id.into(),
            irp: irp.id.clone(),
            irp_title: irp.title.clone(),
            started: now,
            status: SessionStatus::Active,
            frontier,
            reached_end: false,
            log: alloc::vec![IncidentEvent {
                timestamp: now,
                actor: actor.into(),
                node: None,
                text: alloc::format!("IRP {} initiated by {actor}", irp.title),
            }],
        })
    }

    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    fn check_writable(&self, now: DateTime<FixedOffset>) -> Result<(), SessionError> {
        if !self.is_active() {
            return Err(SessionError::SessionNotActive(self.status));
        }
        if let Some(last) = self.log.last() {
            if now < last.timestamp {
                return Err(SessionError::ClockRegression {
                    last: last.timestamp,
                    got: now,
                });
            }
        }
        Ok(())
    }

    /// Applies one step. On error the session is left untouched.
    pub fn record_step(
        &mut self,
        chart: &Flowchart,
        step: &StepRequest,
        now: DateTime<FixedOffset>,
    ) -> Result<&IncidentEvent, SessionError> {
        self.check_writable(now)?;
        let actor = step.actor.as_str();
        let note = step.note.trim();

        let Some(node) = step.node.as_deref() else {
            if note.is_empty() {
                return Err(SessionError::EmptyNote);
            }
            if step.decision.is_some() {
                return Err(SessionError::DecisionWithoutNode);
            }
            self.log.push(IncidentEvent {
                timestamp: now,
                actor: actor.into(),
                node: None,
                text: note.into(),
            });
            return Ok(self.log.last().expect("just pushed"));
        };

        let frontier = advance(chart, &self.frontier, node, step.decision.as_deref())?;
        let info = chart.node(node).expect("advance checked the node");
        let mut text = match step.decision.as_deref() {
            Some(label) => alloc::format!("{actor} chose '{label}' at {node} ({})", info.label),
            None => alloc::format!("{actor} completed {node} ({})", info.label),
        };
        if !note.is_empty() {
            text.push_str(": ");
            text.push_str(note);
        }

        self.frontier = frontier;
        if info.kind == NodeKind::End {
            self.reached_end = true;
        }
        if self.frontier.is_empty() && self.reached_end {
            self.status = SessionStatus::Complete;
        }
        self.log.push(IncidentEvent {
            timestamp: now,
            actor: actor.into(),
            node: Some(info.id.clone()),
            text,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    /// Ends an active session early. The frontier is kept for the record.
    pub fn abort(
        &mut self,
        actor: &str,
        reason: &str,
        now: DateTime<FixedOffset>,
    ) -> Result<&IncidentEvent, SessionError> {
        self.check_writable(now)?;
        let reason = reason.trim();
        let text = if reason.is_empty() {
            alloc::format!("Incident aborted by {actor}")
        } else {
            alloc::format!("Incident aborted by {actor}: {reason}")
        };
        self.status = SessionStatus::Aborted;
        self.log.push(IncidentEvent {
            timestamp: now,
            actor: actor.into(),
            node: None,
            text,
        });
        Ok(self.log.last().expect("just pushed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::DocKind;
    use crate::format::parse_flowchart;
    use crate::version::Version;
    use chrono::{NaiveDate, TimeZone};

    fn at(minute: u32) -> DateTime<FixedOffset> {
        FixedOffset::east_opt(0)
            .unwrap()
            .with_ymd_and_hms(2024, 3, 1, 9, minute, 0)
            .unwrap()
    }

    fn irp() -> PlaybookDoc {
        PlaybookDoc {
            id: DocId::new("irp_x").unwrap(),
            kind: DocKind::Irp,
            title: "Stolen Device".into(),
            version: Version::new(1, 0, 0, NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()),
            owner: "sec".into(),
            references: Vec::new(),
            body: String::new(),
            flowchart: Some(
                parse_flowchart(
                    "node s start \"S\"\nnode a action \"Wipe\"\nnode e end \"E\"\nedge s a\nedge a e\n",
                )
                .unwrap(),
            ),
            tech_context: Vec::new(),
        }
    }

    fn step(node: Option<&str>, note: &str) -> StepRequest {
        StepRequest {
            node: node.map(Into::into),
            decision: None,
            note: note.into(),
            actor: "Bob".into(),
        }
    }

    #[test]
    fn walk_to_completion() {
        let doc = irp();
        let chart = doc.flowchart.clone().unwrap();
        let mut s = IncidentSession::open("s1", &doc, "Bob", at(0)).unwrap();
        assert_eq!(s.log[0].text, "IRP Stolen Device initiated by Bob");

        s.record_step(&chart, &step(None, "reviewing the wipe SOP"), at(5))
            .unwrap();
        assert_eq!(s.frontier.len(), 1);
        let event = s
            .record_step(&chart, &step(Some("a"), "done"), at(10))
            .unwrap();
        assert_eq!(event.text, "Bob completed a (Wipe): done");
        s.record_step(&chart, &step(Some("e"), ""), at(15)).unwrap();
        assert_eq!(s.status, SessionStatus::Complete);
        assert_eq!(
            s.record_step(&chart, &step(None, "late"), at(20)),
            Err(SessionError::SessionNotActive(SessionStatus::Complete))
        );
    }

    #[test]
    fn errors_leave_the_session_unchanged() {
        let doc = irp();
        let chart = doc.flowchart.clone().unwrap();
        let mut s = IncidentSession::open("s1", &doc, "Bob", at(10)).unwrap();
        let before = s.clone();
        assert!(matches!(
            s.record_step(&chart, &step(Some("e"), ""), at(11)),
            Err(SessionError::Exec(ExecError::NodeNotActive(_)))
        ));
        assert!(matches!(
            s.record_step(&chart, &step(Some("a"), ""), at(5)),
            Err(SessionError::ClockRegression { .. })
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn sops_cannot_be_opened() {
        let mut doc = irp();
        doc.kind = DocKind::Sop;
        assert_eq!(
            IncidentSession::open("s1", &doc, "Bob", at(0)),
            Err(SessionError::NotAnIrp(doc.id.clone()))
        );
    }
}
