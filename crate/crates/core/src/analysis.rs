//! Structural analysis of a single flowchart.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::flowchart::{Flowchart, NodeKind};
use crate::ids::NodeId;
use crate::lint::{FindingCode, Severity};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChartFinding {
    pub node: NodeId,
    pub code: FindingCode,
    pub severity: Severity,
    pub detail: String,
}

/// Findings for one chart, sorted by (node, code, detail).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartReport {
    pub findings: Vec<ChartFinding>,
}

impl ChartReport {
    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn errors(&self) -> impl Iterator<Item = &ChartFinding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn has_code(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }
}

fn reach<'a>(
    seeds: impl IntoIterator<Item = &'a NodeId>,
    next: &BTreeMap<&'a NodeId, Vec<&'a NodeId>>,
) -> BTreeSet<&'a NodeId> {
    let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
    let mut queue: VecDeque<&NodeId> = VecDeque::new();
    for seed in seeds {
        if seen.insert(seed) {
            queue.push_back(seed);
        }
    }
    while let Some(node) = queue.pop_front() {
        for &n in next.get(node).into_iter().flatten() {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Checks a chart for completeness problems.
///
/// * `UnreachableNode` (error): no path from the start node.
/// * `DeadEnd` (error): a non-end node without outgoing edges, or a node
///   whose every path is trapped in a loop that never leaves. Nodes that
///   merely lead into a reported sink are not reported again.
/// * `CyclicFlow` (error): one finding per loop, on its smallest node.
/// * `NondeterministicBranch` (error): repeated labels on a decision.
/// * `ParallelFork` (info): a non-decision node with several successors.
pub fn analyze_flowchart(chart: &Flowchart) -> ChartReport {
    let mut forward: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    let mut backward: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for edge in chart.edges() {
        forward.entry(&edge.from).or_default().push(&edge.to);
        backward.entry(&edge.to).or_default().push(&edge.from);
    }

    let mut findings = Vec::new();
    let mut push = |node: &NodeId, code: FindingCode, detail: String| {
        findings.push(ChartFinding {
            node: node.clone(),
            severity: code.severity(),
            code,
            detail: alloc::format!("{node}: {detail}"),
        });
    };

    let reachable = reach([&chart.start().id], &forward);
    let sinks: Vec<&NodeId> = chart
        .nodes()
        .iter()
        .filter(|n| n.kind != NodeKind::End && !forward.contains_key(&n.id))
        .map(|n| &n.id)
        .collect();
    let ends = chart
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::End)
        .map(|n| &n.id);
    let can_finish_or_sink = reach(ends.chain(sinks.iter().copied()), &backward);

    for node in chart.nodes() {
        let id = &node.id;
        if node.kind != NodeKind::Start && !reachable.contains(id) {
            push(
                id,
                FindingCode::UnreachableNode,
                "not reachable from the start node".into(),
            );
        }
        if sinks.contains(&id) {
            push(id, FindingCode::DeadEnd, "has no outgoing edges".into());
        } else if !can_finish_or_sink.contains(id) {
            push(
                id,
                FindingCode::DeadEnd,
                "no path from here reaches an end node".into(),
            );
        }
        let out: Vec<_> = chart.outgoing(id.as_str()).collect();
        if node.kind == NodeKind::Decision {
            let mut labels = BTreeSet::new();
            for edge in &out {
                let label = edge.label.as_deref().unwrap_or("");
                if !labels.insert(label) {
                    push(
                        id,
                        FindingCode::NondeterministicBranch,
                        alloc::format!("branch label `{label}` is used more than once"),
                    );
                }
            }
        } else if out.len() > 1 {
            push(
                id,
                FindingCode::ParallelFork,
                alloc::format!("forks into {} parallel tracks", out.len()),
            );
        }
    }

    // Loops: group mutually reachable nodes, report each group once.
    let mut reported: BTreeSet<&NodeId> = BTreeSet::new();
    for node in chart.nodes() {
        let id = &node.id;
        if reported.contains(id) {
            continue;
        }
        let succ = forward.get(id).cloned().unwrap_or_default();
        let from_here = reach(succ, &forward);
        if !from_here.contains(id) {
            continue;
        }
        let preds = backward.get(id).cloned().unwrap_or_default();
        let to_here = reach(preds, &backward);
        let mut members: Vec<&NodeId> = from_here.intersection(&to_here).copied().collect();
        members.sort();
        reported.extend(members.iter().copied());
        let path: Vec<&str> = members.iter().map(|m| m.as_str()).collect();
        push(
            members[0],
            FindingCode::CyclicFlow,
            alloc::format!("loop through {}", path.join(", ")),
        );
    }

    findings.sort();
    ChartReport { findings }
}
