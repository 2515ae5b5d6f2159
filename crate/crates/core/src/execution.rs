//! Token-based execution of a flowchart.
//!
//! The frontier is the set of nodes currently holding a token. Non-decision
//! nodes pass a token down every outgoing edge (parallel tracks), decisions
//! down exactly one, and end nodes absorb theirs. Tokens arriving at a node
//! that already holds one merge with it.

use alloc::collections::BTreeSet;
use alloc::string::String;

use crate::analysis::{analyze_flowchart, ChartReport};
use crate::flowchart::{Flowchart, NodeKind};
use crate::ids::NodeId;

pub type Frontier = BTreeSet<NodeId>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("the chart has {} analysis error(s)", .0.errors().count())]
    IncompleteChart(ChartReport),
    #[error("node `{0}` does not hold a token")]
    NodeNotActive(String),
    #[error("decision `{0}` needs a branch label")]
    MissingDecision(NodeId),
    #[error("decision `{node}` has no branch labeled `{label}`")]
    UnknownBranch { node: NodeId, label: String },
    #[error("`{0}` is not a decision; no branch label may be given")]
    UnexpectedDecision(NodeId),
}

impl ExecError {
    /// Stable machine-readable name of the error.
    pub fn code(&self) -> &'static str {
        match self {
            ExecError::IncompleteChart(_) => "IncompleteChart",
            ExecError::NodeNotActive(_) => "NodeNotActive",
            ExecError::MissingDecision(_) => "MissingDecision",
            ExecError::UnknownBranch { .. } => "UnknownBranch",
            ExecError::UnexpectedDecision(_) => "UnexpectedDecision",
        }
    }
}

/// Places one token on each successor of the start node.
pub fn start_execution(chart: &Flowchart) -> Result<Frontier, ExecError> {
    let report = analyze_flowchart(chart);
    if report.has_errors() {
        return Err(ExecError::IncompleteChart(report));
    }
    Ok(chart
        .outgoing(chart.start().id.as_str())
        .map(|e| e.to.clone())
        .collect())
}

/// Moves the token on `node` forward. `decision` must be given exactly when
/// `node` is a decision and must name one of its branches.
pub fn advance(
    chart: &Flowchart,
    frontier: &Frontier,
    node: &str,
    decision: Option<&str>,
) -> Result<Frontier, ExecError> {
    let Some(current) = frontier.get(node) else {
        return Err(ExecError::NodeNotActive(node.into()));
    };
    let kind = chart
        .node(node)
        .map(|n| n.kind)
        .ok_or_else(|| ExecError::NodeNotActive(node.into()))?;

    let mut next = frontier.clone();
    next.remove(node);
    match (kind, decision) {
        (NodeKind::Decision, None) => return Err(ExecError::MissingDecision(current.clone())),
        (NodeKind::Decision, Some(label)) => {
            let edge = chart
                .outgoing(node)
                .find(|e| e.label.as_deref() == Some(label))
                .ok_or_else(|| ExecError::UnknownBranch {
                    node: current.clone(),
                    label: label.into(),
                })?;
            next.insert(edge.to.clone());
        }
        (_, Some(_)) => return Err(ExecError::UnexpectedDecision(current.clone())),
        (_, None) => next.extend(chart.outgoing(node).map(|e| e.to.clone())),
    }
    Ok(next)
}
