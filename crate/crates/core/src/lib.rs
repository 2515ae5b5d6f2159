//! Core model and pure logic for incident-response playbooks.
//!
//! Documents (IRPs and SOPs) carry a four-part version, cross-references and
//! an optional execution flowchart. This crate parses and renders them,
//! checks the reference graph and the charts, compiles single-token charts
//! to state machines and drives live token-based executions. It has no IO
//! and builds without `std`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod document;
pub mod execution;
pub mod flowchart;
pub mod format;
pub mod fsm;
pub mod graph;
pub mod ids;
pub mod lint;
pub mod session;
pub mod version;

pub use analysis::{analyze_flowchart, ChartFinding, ChartReport};
pub use document::{DocError, DocKind, PlaybookDoc};
pub use execution::{advance, start_execution, ExecError, Frontier};
pub use flowchart::{Edge, Flowchart, FlowchartError, Node, NodeKind};
pub use format::{
    emit_mermaid, parse_document, parse_flowchart, render_flowchart, serialize_document,
    ParseError, ParseErrorCode,
};
pub use fsm::{
    check_mutual_exclusion, compile_to_fsm, enumerate_paths, CompileError, Fsm, FsmError, Trace,
    TraceStep,
};
pub use graph::{build_ref_graph, detect_cycles, transitive_refs, GraphError, RefGraph};
pub use ids::{DocId, IdError, NodeId, StateId};
pub use lint::{lint_repository, FindingCode, LintFinding, LintReport, Severity};
pub use session::{IncidentEvent, IncidentSession, SessionError, SessionStatus, StepRequest};
pub use version::{compare_versions, Version, VersionError, VersionPart};
