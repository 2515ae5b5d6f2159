//! Finite state machines compiled from single-token flowcharts, with path
//! enumeration and mutual-exclusion queries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_flowchart, ChartReport};
use crate::flowchart::{Flowchart, NodeKind};
use crate::ids::{NodeId, StateId};
use crate::lint::FindingCode;

/// Path budget used by [`check_mutual_exclusion`].
pub const DEFAULT_MAX_PATHS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateInfo {
    pub label: String,
    #[serde(default)]
    pub initial: bool,
    #[serde(default)]
    pub accepting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub from: StateId,
    /// Branch label; `None` for an unconditional transition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub to: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FsmError {
    #[error("a state machine needs exactly one initial state, found {0}")]
    InitialCount(usize),
    #[error("a state machine needs at least one accepting state")]
    NoAccepting,
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state `{from}` has more than one transition on {}", input_name(.input))]
    Nondeterministic {
        from: StateId,
        input: Option<String>,
    },
    #[error("the state machine loops through `{0}`; only acyclic machines can be enumerated")]
    CyclicFsm(StateId),
    #[error("more than {limit} paths")]
    PathExplosion { limit: usize },
}

fn input_name(input: &Option<String>) -> String {
    match input {
        Some(label) => alloc::format!("`{label}`"),
        None => "the empty input".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("the chart forks into parallel tracks at {}", join_ids(.0))]
    ParallelChartNotCompilable(Vec<NodeId>),
    #[error("the chart has {} analysis error(s)", .0.errors().count())]
    IncompleteChart(ChartReport),
}

fn join_ids(ids: &[NodeId]) -> String {
    let parts: Vec<&str> = ids.iter().map(NodeId::as_str).collect();
    parts.join(", ")
}

#[derive(Clone, Serialize, Deserialize)]
struct FsmParts {
    states: BTreeMap<StateId, StateInfo>,
    transitions: Vec<Transition>,
}

/// A deterministic state machine with one initial state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FsmParts", into = "FsmParts")]
pub struct Fsm {
    states: BTreeMap<StateId, StateInfo>,
    transitions: Vec<Transition>,
    initial: StateId,
}

impl TryFrom<FsmParts> for Fsm {
    type Error = FsmError;

    fn try_from(parts: FsmParts) -> Result<Self, Self::Error> {
        Fsm::new(parts.states, parts.transitions)
    }
}

impl From<Fsm> for FsmParts {
    fn from(m: Fsm) -> Self {
        FsmParts {
            states: m.states,
            transitions: m.transitions,
        }
    }
}

impl Fsm {
    /// Validates and builds a machine. Transitions are kept sorted.
    pub fn new(
        states: BTreeMap<StateId, StateInfo>,
        mut transitions: Vec<Transition>,
    ) -> Result<Fsm, FsmError> {
        let initials: Vec<&StateId> = states
            .iter()
            .filter(|(_, s)| s.initial)
            .map(|(id, _)| id)
            .collect();
        if initials.len() != 1 {
            return Err(FsmError::InitialCount(initials.len()));
        }
        let initial = initials[0].clone();
        if !states.values().any(|s| s.accepting) {
            return Err(FsmError::NoAccepting);
        }
        let mut keys = BTreeSet::new();
        for t in &transitions {
            for end in [&t.from, &t.to] {
                if !states.contains_key(end) {
                    return Err(FsmError::UnknownState(end.as_str().into()));
                }
            }
            if !keys.insert((&t.from, &t.input)) {
                return Err(FsmError::Nondeterministic {
                    from: t.from.clone(),
                    input: t.input.clone(),
                });
            }
        }
        transitions.sort();
        Ok(Fsm {
            states,
            transitions,
            initial,
        })
    }

    pub fn states(&self) -> &BTreeMap<StateId, StateInfo> {
        &self.states
    }

    pub fn state(&self, id: &str) -> Option<&StateInfo> {
        self.states.get(id)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn initial(&self) -> &StateId {
        &self.initial
    }

    pub fn accepting(&self) -> impl Iterator<Item = &StateId> {
        self.states
            .iter()
            .filter(|(_, s)| s.accepting)
            .map(|(id, _)| id)
    }

    /// Transitions leaving `from`, ordered by (input, target).
    pub fn outgoing(&self, from: &str) -> &[Transition] {
        let lo = self.transitions.partition_point(|t| t.from.as_str() < from);
        let hi = self
            .transitions
            .partition_point(|t| t.from.as_str() <= from);
        &self.transitions[lo..hi]
    }

    /// The target of the transition on `input` from `from`, if any.
    pub fn step(&self, from: &str, input: Option<&str>) -> Option<&StateId> {
        self.outgoing(from)
            .iter()
            .find(|t| t.input.as_deref() == input)
            .map(|t| &t.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraceStep {
    pub node: NodeId,
    /// Branch taken when leaving this step; only set on decision steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_label: Option<String>,
}

/// One complete walk from the initial state to an accepting state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.steps.iter().map(|s| &s.node)
    }

    pub fn visits(&self, node: &str) -> bool {
        self.steps.iter().any(|s| s.node == node)
    }

    /// Compact form, e.g. `S1 S2 S3[yes] S4 ...`.
    pub fn to_text(&self) -> String {
        let parts: Vec<String> = self
            .steps
            .iter()
            .map(|s| match &s.chosen_label {
                Some(label) => alloc::format!("{}[{label}]", s.node),
                None => s.node.as_str().into(),
            })
            .collect();
        parts.join(" ")
    }

    fn key(&self) -> (Vec<&NodeId>, Vec<Option<&str>>) {
        (
            self.steps.iter().map(|s| &s.node).collect(),
            self.steps
                .iter()
                .map(|s| s.chosen_label.as_deref())
                .collect(),
        )
    }
}

/// Compiles a single-token chart: one state per node, start ↦ initial,
/// end nodes ↦ accepting, branch labels ↦ transition inputs.
pub fn compile_to_fsm(chart: &Flowchart) -> Result<Fsm, CompileError> {
    let report = analyze_flowchart(chart);
    let forks: Vec<NodeId> = report
        .findings
        .iter()
        .filter(|f| f.code == FindingCode::ParallelFork)
        .map(|f| f.node.clone())
        .collect();
    if !forks.is_empty() {
        return Err(CompileError::ParallelChartNotCompilable(forks));
    }
    if report.has_errors() {
        return Err(CompileError::IncompleteChart(report));
    }

    let states = chart
        .nodes()
        .iter()
        .map(|n| {
            (
                n.id.clone(),
                StateInfo {
                    label: n.label.clone(),
                    initial: n.kind == NodeKind::Start,
                    accepting: n.kind == NodeKind::End,
                },
            )
        })
        .collect();
    let transitions = chart
        .edges()
        .iter()
        .map(|e| Transition {
            from: e.from.clone(),
            input: e.label.clone(),
            to: e.to.clone(),
        })
        .collect();
    Ok(Fsm::new(states, transitions).expect("a valid single-token chart is deterministic"))
}

/// Finds a cycle reachable from the initial state, if any.
fn reachable_cycle(m: &Fsm) -> Option<StateId> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<&StateId, Mark> = BTreeMap::new();
    let mut frames: Vec<(&StateId, Vec<&StateId>)> = Vec::new();
    let succ = |s: &StateId| -> Vec<&StateId> {
        m.outgoing(s.as_str()).iter().map(|t| &t.to).rev().collect()
    };

    marks.insert(m.initial(), Mark::Open);
    frames.push((m.initial(), succ(m.initial())));
    while let Some((state, pending)) = frames.last_mut() {
        match pending.pop() {
            Some(next) => match marks.get(next) {
                Some(Mark::Open) => return Some(next.clone()),
                Some(Mark::Done) => {}
                None => {
                    marks.insert(next, Mark::Open);
                    frames.push((next, succ(next)));
                }
            },
            None => {
                marks.insert(state, Mark::Done);
                frames.pop();
            }
        }
    }
    None
}

/// All initial→accepting paths in lexicographic order of state ids.
///
/// Fails with `CyclicFsm` if a loop is reachable, and with `PathExplosion`
/// as soon as more than `max_paths` paths exist.
pub fn enumerate_paths(m: &Fsm, max_paths: usize) -> Result<Vec<Trace>, FsmError> {
    if let Some(state) = reachable_cycle(m) {
        return Err(FsmError::CyclicFsm(state));
    }

    let mut out = Vec::new();
    let mut path: Vec<TraceStep> = Vec::new();
    walk(m, m.initial(), &mut path, &mut out, max_paths)?;
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(out)
}

fn walk(
    m: &Fsm,
    state: &StateId,
    path: &mut Vec<TraceStep>,
    out: &mut Vec<Trace>,
    max_paths: usize,
) -> Result<(), FsmError> {
    let info = &m.states[state];
    if info.accepting {
        let mut steps = path.clone();
        steps.push(TraceStep {
            node: state.clone(),
            chosen_label: None,
        });
        if out.len() == max_paths {
            return Err(FsmError::PathExplosion { limit: max_paths });
        }
        out.push(Trace { steps });
    }
    for t in m.outgoing(state.as_str()) {
        path.push(TraceStep {
            node: state.clone(),
            chosen_label: t.input.clone(),
        });
        let result = walk(m, &t.to, path, out, max_paths);
        path.pop();
        result?;
    }
    Ok(())
}

/// True iff no initial→accepting path visits both `a` and `b`.
pub fn check_mutual_exclusion(m: &Fsm, a: &str, b: &str) -> Result<bool, FsmError> {
    check_mutual_exclusion_within(m, a, b, DEFAULT_MAX_PATHS)
}

pub fn check_mutual_exclusion_within(
    m: &Fsm,
    a: &str,
    b: &str,
    max_paths: usize,
) -> Result<bool, FsmError> {
    for id in [a, b] {
        if m.state(id).is_none() {
            return Err(FsmError::UnknownState(id.into()));
        }
    }
    let paths = enumerate_paths(m, max_paths)?;
    Ok(!paths.iter().any(|p| p.visits(a) && p.visits(b)))
}
