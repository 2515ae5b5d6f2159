//! Text formats: the `.playbook` document format, the embedded flowchart
//! DSL and mermaid rendering.
//!
//! A document is UTF-8 text with a front-matter block of `key: value` lines
//! fenced by `---`, followed by a markdown body. The body may end with one
//! fenced block tagged `flowchart`:
//!
//! ````text
//! ---
//! id: irp_stolen_device
//! kind: IRP
//! title: Stolen Device
//! version: 1.2.14.20240107
//! owner: Security Operations
//! references: sop_1, sop_2
//! ---
//! # Stolen device
//!
//! ```flowchart
//! node start start "IRP Start"
//! node SOP_1 action "File police report" ref=sop_1
//! node end end "IRP End"
//! edge start SOP_1
//! edge SOP_1 end
//! ```
//! ````
//!
//! Parsing is fail-fast: the first problem found is returned.

mod document;
mod dsl;
mod mermaid;

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use document::{parse_document, serialize_document};
pub use dsl::{parse_flowchart, render_flowchart};
pub use mermaid::emit_mermaid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParseErrorCode {
    BadFrontMatter,
    BadVersion,
    BadFlowchart,
    DuplicateNode,
    UnknownEdgeEndpoint,
    MissingField,
}

impl ParseErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorCode::BadFrontMatter => "BadFrontMatter",
            ParseErrorCode::BadVersion => "BadVersion",
            ParseErrorCode::BadFlowchart => "BadFlowchart",
            ParseErrorCode::DuplicateNode => "DuplicateNode",
            ParseErrorCode::UnknownEdgeEndpoint => "UnknownEdgeEndpoint",
            ParseErrorCode::MissingField => "MissingField",
        }
    }
}

impl fmt::Display for ParseErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Location and class of the first problem in a source text. Lines and
/// columns are 1-based; columns count characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub code: ParseErrorCode,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(
        code: ParseErrorCode,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        ParseError {
            path: String::new(),
            line,
            column,
            code,
            message: message.into(),
        }
    }

    pub(crate) fn with_path(mut self, path: &str) -> Self {
        self.path = path.into();
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}: {}",
            self.path, self.line, self.column, self.code, self.message
        )
    }
}

impl core::error::Error for ParseError {}

/// 1-based character column of byte offset `at` within `line`.
pub(crate) fn column_of(line: &str, at: usize) -> usize {
    line[..at.min(line.len())].chars().count() + 1
}
