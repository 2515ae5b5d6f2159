//! Executable workflow charts: start, end, action and decision nodes joined
//! by directed edges.
//!
//! A [`Flowchart`] can only be built through [`Flowchart::new`], which checks
//! the structural rules. Reachability and completion are analysis concerns
//! and live in [`crate::analysis`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{DocId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Start,
    End,
    Action,
    Decision,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Start => "start",
            NodeKind::End => "end",
            NodeKind::Action => "action",
            NodeKind::Decision => "decision",
        }
    }

    pub fn parse(s: &str) -> Option<NodeKind> {
        match s {
            "start" => Some(NodeKind::Start),
            "end" => Some(NodeKind::End),
            "action" => Some(NodeKind::Action),
            "decision" => Some(NodeKind::Decision),
            _ => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    /// Document executed at this step, if any.
    #[serde(default, rename = "ref", skip_serializing_if = "Option::is_none")]
    pub doc_ref: Option<DocId>,
}

impl Node {
    pub fn new(id: NodeId, kind: NodeKind, label: impl Into<String>) -> Self {
        Node {
            id,
            kind,
            label: label.into(),
            doc_ref: None,
        }
    }

    pub fn with_ref(mut self, doc: DocId) -> Self {
        self.doc_ref = Some(doc);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Edge {
    pub fn new(from: NodeId, to: NodeId) -> Self {
        Edge {
            from,
            to,
            label: None,
        }
    }

    pub fn labeled(from: NodeId, to: NodeId, label: impl Into<String>) -> Self {
        Edge {
            from,
            to,
            label: Some(label.into()),
        }
    }
}

/// Structural rule violated by a candidate flowchart.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlowchartError {
    #[error("node `{0}` is declared more than once")]
    DuplicateNode(NodeId),
    #[error("edge {from} -> {to} refers to undeclared node `{missing}`")]
    UnknownEndpoint {
        from: NodeId,
        to: NodeId,
        missing: NodeId,
    },
    #[error("a flowchart needs exactly one start node, found {0}")]
    StartCount(usize),
    #[error("a flowchart needs at least one end node")]
    NoEnd,
    #[error("start node `{0}` has incoming edges")]
    StartHasIncoming(NodeId),
    #[error("end node `{0}` has outgoing edges")]
    EndHasOutgoing(NodeId),
    #[error("decision `{0}` has an unlabeled branch")]
    UnlabeledBranch(NodeId),
    #[error("decision `{node}` has more than one branch labeled `{label}`")]
    DuplicateBranchLabel { node: NodeId, label: String },
    #[error("decision `{0}` needs at least two branches")]
    SingleBranchDecision(NodeId),
    #[error("edge leaving non-decision node `{0}` must not carry a label")]
    LabeledNonDecisionEdge(NodeId),
    #[error("edge {0} -> {1} is declared more than once")]
    DuplicateEdge(NodeId, NodeId),
    #[error("label of `{0}` must be a non-empty single line")]
    BadLabel(String),
}

/// Serde carrier; deserialization goes through [`Flowchart::new`].
#[derive(Clone, Serialize, Deserialize)]
struct FlowchartParts {
    #[serde(default)]
    name: String,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FlowchartParts", into = "FlowchartParts")]
pub struct Flowchart {
    name: String,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl TryFrom<FlowchartParts> for Flowchart {
    type Error = FlowchartError;

    fn try_from(parts: FlowchartParts) -> Result<Self, Self::Error> {
        Flowchart::new(parts.name, parts.nodes, parts.edges)
    }
}

impl From<Flowchart> for FlowchartParts {
    fn from(chart: Flowchart) -> Self {
        FlowchartParts {
            name: chart.name,
            nodes: chart.nodes,
            edges: chart.edges,
        }
    }
}

fn single_line(s: &str) -> bool {
    !s.is_empty() && !s.contains(['\n', '\r'])
}

impl Flowchart {
    /// Validates and assembles a chart. Nodes and edges keep their given
    /// (declaration) order.
    pub fn new(
        name: impl Into<String>,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
    ) -> Result<Flowchart, FlowchartError> {
        let name = name.into();
        if name.contains(['\n', '\r']) {
            return Err(FlowchartError::BadLabel(name));
        }

        let mut kinds: BTreeMap<&NodeId, NodeKind> = BTreeMap::new();
        for node in &nodes {
            if kinds.insert(&node.id, node.kind).is_some() {
                return Err(FlowchartError::DuplicateNode(node.id.clone()));
            }
            if !single_line(&node.label) {
                return Err(FlowchartError::BadLabel(node.id.as_str().into()));
            }
        }

        let mut seen_edges = BTreeSet::new();
        let mut branch_labels: BTreeMap<&NodeId, BTreeSet<&str>> = BTreeMap::new();
        for edge in &edges {
            for end in [&edge.from, &edge.to] {
                if !kinds.contains_key(end) {
                    return Err(FlowchartError::UnknownEndpoint {
                        from: edge.from.clone(),
                        to: edge.to.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if kinds[&edge.to] == NodeKind::Start {
                return Err(FlowchartError::StartHasIncoming(edge.to.clone()));
            }
            match (kinds[&edge.from], edge.label.as_deref()) {
                (NodeKind::End, _) => {
                    return Err(FlowchartError::EndHasOutgoing(edge.from.clone()))
                }
                (NodeKind::Decision, None) => {
                    return Err(FlowchartError::UnlabeledBranch(edge.from.clone()))
                }
                (NodeKind::Decision, Some(label)) => {
                    if !single_line(label) {
                        return Err(FlowchartError::BadLabel(edge.from.as_str().into()));
                    }
                    if !branch_labels.entry(&edge.from).or_default().insert(label) {
                        return Err(FlowchartError::DuplicateBranchLabel {
                            node: edge.from.clone(),
                            label: label.into(),
                        });
                    }
                }
                (_, Some(_)) => {
                    return Err(FlowchartError::LabeledNonDecisionEdge(edge.from.clone()))
                }
                (_, None) => {
                    if !seen_edges.insert((&edge.from, &edge.to)) {
                        return Err(FlowchartError::DuplicateEdge(
                            edge.from.clone(),
                            edge.to.clone(),
                        ));
                    }
                }
            }
        }

        for (id, labels) in &branch_labels {
            if labels.len() == 1 {
                return Err(FlowchartError::SingleBranchDecision((*id).clone()));
            }
        }

        let starts = nodes.iter().filter(|n| n.kind == NodeKind::Start).count();
        if starts != 1 {
            return Err(FlowchartError::StartCount(starts));
        }
        if !nodes.iter().any(|n| n.kind == NodeKind::End) {
            return Err(FlowchartError::NoEnd);
        }

        Ok(Flowchart { name, nodes, edges })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Nodes in declaration order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edges in declaration order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id.as_str() == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.node(id).is_some()
    }

    pub fn start(&self) -> &Node {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Start)
            .expect("validated flowchart has a start node")
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from.as_str() == id)
    }

    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.to.as_str() == id)
    }

    /// Documents referenced by node `ref` attributes, in node order.
    pub fn referenced_docs(&self) -> impl Iterator<Item = &DocId> {
        self.nodes.iter().filter_map(|n| n.doc_ref.as_ref())
    }

    /// Returns a copy with one extra edge, re-validated.
    pub fn with_edge(&self, edge: Edge) -> Result<Flowchart, FlowchartError> {
        let mut edges = self.edges.clone();
        edges.push(edge);
        Flowchart::new(self.name.clone(), self.nodes.clone(), edges)
    }
}
