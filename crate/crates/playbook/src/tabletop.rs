//! Headless playbook runs: decisions are answered from a script.
//!
//! Each step moves the token on the smallest active node id. Decision nodes
//! take the next scripted answer; every other node is simply completed.

use playbook_core::{Flowchart, IncidentSession, NodeId, NodeKind, StepRequest};

/// Why a run stopped before the session finished.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stop {
    /// Finished: the session is no longer active.
    Done,
    /// A decision was reached with no answer left.
    ScriptExhausted(NodeId),
}

/// The next step under the tabletop policy, or `None` when the frontier is
/// empty. `answer` is consulted only at decision nodes.
pub fn next_step(
    chart: &Flowchart,
    session: &IncidentSession,
    actor: &str,
    answer: &mut dyn FnMut(&NodeId) -> Option<String>,
) -> Option<Result<StepRequest, Stop>> {
    let node = session.frontier.iter().next()?;
    let kind = chart.node(node.as_str()).map(|n| n.kind);
    let decision = if kind == Some(NodeKind::Decision) {
        match answer(node) {
            Some(label) => Some(label),
            None => return Some(Err(Stop::ScriptExhausted(node.clone()))),
        }
    } else {
        None
    };
    Some(Ok(StepRequest {
        node: Some(node.to_string()),
        decision,
        note: String::new(),
        actor: actor.to_string(),
    }))
}

/// Drives a session to the end through `apply`, which records one step and
/// returns the updated session.
pub fn run<E>(
    chart: &Flowchart,
    mut session: IncidentSession,
    actor: &str,
    answer: &mut dyn FnMut(&NodeId) -> Option<String>,
    mut apply: impl FnMut(&StepRequest) -> Result<IncidentSession, E>,
) -> Result<(IncidentSession, Stop), E> {
    while session.is_active() {
        match next_step(chart, &session, actor, answer) {
            None => break,
            Some(Err(stop)) => return Ok((session, stop)),
            Some(Ok(step)) => session = apply(&step)?,
        }
    }
    Ok((session, Stop::Done))
}
