//! Line-oriented flowchart DSL.
//!
//! ```text
//! # comment
//! name "Stolen device workflow"
//! node <id> <start|end|action|decision> "<label>" [ref=<doc-id>]
//! edge <from> <to> [<label>]
//! ```
//!
//! Quoted strings accept `\"` and `\\` escapes. Edge labels may be bare
//! words or quoted. Edges may name nodes declared further down.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{column_of, ParseError, ParseErrorCode};
use crate::flowchart::{Edge, Flowchart, FlowchartError, Node, NodeKind};
use crate::ids::{DocId, NodeId};

struct Token<'a> {
    text: TokenText<'a>,
    /// byte offset within the line
    at: usize,
}

enum TokenText<'a> {
    Bare(&'a str),
    Quoted(String),
}

impl Token<'_> {
    fn bare(&self) -> Option<&str> {
        match &self.text {
            TokenText::Bare(s) => Some(s),
            TokenText::Quoted(_) => None,
        }
    }

    fn into_text(self) -> String {
        match self.text {
            TokenText::Bare(s) => s.into(),
            TokenText::Quoted(s) => s,
        }
    }
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token<'_>>, ParseError> {
    let mut tokens = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if bytes[i] == b'"' {
            let mut text = String::new();
            let mut chars = line[i + 1..].char_indices();
            let mut closed = None;
            while let Some((off, c)) = chars.next() {
                match c {
                    '"' => {
                        closed = Some(i + 1 + off + 1);
                        break;
                    }
                    '\\' => {
                        match chars.next() {
                            Some((_, e @ ('"' | '\\'))) => text.push(e),
                            _ => return Err(ParseError::new(
                                ParseErrorCode::BadFlowchart,
                                line_no,
                                column_of(line, i + 1 + off),
                                "invalid escape in quoted string (only \\\" and \\\\ are allowed)",
                            )),
                        }
                    }
                    c => text.push(c),
                }
            }
            let Some(end) = closed else {
                return Err(ParseError::new(
                    ParseErrorCode::BadFlowchart,
                    line_no,
                    column_of(line, start),
                    "unterminated quoted string",
                ));
            };
            if end < bytes.len() && !bytes[end].is_ascii_whitespace() {
                return Err(ParseError::new(
                    ParseErrorCode::BadFlowchart,
                    line_no,
                    column_of(line, end),
                    "expected whitespace after quoted string",
                ));
            }
            tokens.push(Token {
                text: TokenText::Quoted(text),
                at: start,
            });
            i = end;
        } else {
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            tokens.push(Token {
                text: TokenText::Bare(&line[start..i]),
                at: start,
            });
        }
    }
    Ok(tokens)
}

struct Located<T> {
    value: T,
    line: usize,
}

fn bad(line_no: usize, line: &str, at: usize, message: impl Into<String>) -> ParseError {
    ParseError::new(
        ParseErrorCode::BadFlowchart,
        line_no,
        column_of(line, at),
        message,
    )
}

fn node_id(token: &Token<'_>, line_no: usize, line: &str) -> Result<NodeId, ParseError> {
    token
        .bare()
        .and_then(|s| NodeId::new(s).ok())
        .ok_or_else(|| bad(line_no, line, token.at, "node ids must match [A-Za-z0-9_]+"))
}

/// Parses the contents of a flowchart block (without the surrounding fence).
pub fn parse_flowchart(block: &str) -> Result<Flowchart, ParseError> {
    parse_flowchart_at(block, 1)
}

/// Like [`parse_flowchart`], reporting line numbers offset so that the
/// block's first line is `first_line`.
pub(crate) fn parse_flowchart_at(block: &str, first_line: usize) -> Result<Flowchart, ParseError> {
    let mut name: Option<String> = None;
    let mut nodes: Vec<Located<Node>> = Vec::new();
    let mut edges: Vec<Located<Edge>> = Vec::new();
    let mut declared: BTreeMap<NodeId, usize> = BTreeMap::new();

    for (idx, raw) in block.lines().enumerate() {
        let line_no = first_line + idx;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = tokenize(line, line_no)?.into_iter();
        let Some(head) = tokens.next() else { continue };
        match head.bare() {
            Some("name") => {
                let Some(value) = tokens.next().filter(|t| t.bare().is_none()) else {
                    return Err(bad(line_no, line, head.at, "expected `name \"<text>\"`"));
                };
                if name.is_some() {
                    return Err(bad(line_no, line, head.at, "chart name given twice"));
                }
                name = Some(value.into_text());
            }
            Some("node") => {
                let (Some(id_tok), Some(kind_tok), Some(label_tok)) =
                    (tokens.next(), tokens.next(), tokens.next())
                else {
                    return Err(bad(
                        line_no,
                        line,
                        head.at,
                        "expected `node <id> <kind> \"<label>\" [ref=<doc-id>]`",
                    ));
                };
                let id = node_id(&id_tok, line_no, line)?;
                let kind = kind_tok.bare().and_then(NodeKind::parse).ok_or_else(|| {
                    bad(
                        line_no,
                        line,
                        kind_tok.at,
                        "node kind must be start, end, action or decision",
                    )
                })?;
                if label_tok.bare().is_some() {
                    return Err(bad(
                        line_no,
                        line,
                        label_tok.at,
                        "node label must be quoted",
                    ));
                }
                let mut node = Node::new(id.clone(), kind, label_tok.into_text());
                if let Some(ref_tok) = tokens.next() {
                    let target = ref_tok
                        .bare()
                        .and_then(|s| s.strip_prefix("ref="))
                        .ok_or_else(|| bad(line_no, line, ref_tok.at, "expected `ref=<doc-id>`"))?;
                    let doc = DocId::new(target)
                        .map_err(|e| bad(line_no, line, ref_tok.at, alloc::format!("{e}")))?;
                    node = node.with_ref(doc);
                }
                if let Some(extra) = tokens.next() {
                    return Err(bad(line_no, line, extra.at, "unexpected trailing input"));
                }
                if let Some(first) = declared.get(&id) {
                    return Err(ParseError::new(
                        ParseErrorCode::DuplicateNode,
                        line_no,
                        column_of(line, id_tok.at),
                        alloc::format!("node `{id}` already declared on line {first}"),
                    ));
                }
                declared.insert(id, line_no);
                nodes.push(Located {
                    value: node,
                    line: line_no,
                });
            }
            Some("edge") => {
                let (Some(from_tok), Some(to_tok)) = (tokens.next(), tokens.next()) else {
                    return Err(bad(
                        line_no,
                        line,
                        head.at,
                        "expected `edge <from> <to> [<label>]`",
                    ));
                };
                let from = node_id(&from_tok, line_no, line)?;
                let to = node_id(&to_tok, line_no, line)?;
                let label = tokens.next().map(Token::into_text);
                if let Some(extra) = tokens.next() {
                    return Err(bad(line_no, line, extra.at, "unexpected trailing input"));
                }
                edges.push(Located {
                    value: Edge { from, to, label },
                    line: line_no,
                });
            }
            _ => {
                return Err(bad(
                    line_no,
                    line,
                    head.at,
                    "expected a `node`, `edge` or `name` statement",
                ))
            }
        }
    }

    for edge in &edges {
        for end in [&edge.value.from, &edge.value.to] {
            if !declared.contains_key(end) {
                return Err(ParseError::new(
                    ParseErrorCode::UnknownEdgeEndpoint,
                    edge.line,
                    1,
                    alloc::format!("edge refers to undeclared node `{end}`"),
                ));
            }
        }
    }

    let line_of_node = |id: &NodeId| declared.get(id).copied().unwrap_or(first_line);
    let nth_edge_line = |pred: &dyn Fn(&Edge) -> bool, nth: usize| {
        edges
            .iter()
            .filter(|e| pred(&e.value))
            .nth(nth)
            .map(|e| e.line)
    };

    let node_values = nodes.iter().map(|n| n.value.clone()).collect();
    let edge_values = edges.iter().map(|e| e.value.clone()).collect();
    Flowchart::new(name.unwrap_or_default(), node_values, edge_values).map_err(|err| {
        let line = match &err {
            FlowchartError::DuplicateBranchLabel { node, label } => nth_edge_line(
                &|e| e.from == *node && e.label.as_deref() == Some(label.as_str()),
                1,
            ),
            FlowchartError::DuplicateEdge(from, to) => {
                nth_edge_line(&|e| e.from == *from && e.to == *to, 1)
            }
            FlowchartError::UnlabeledBranch(node) => {
                nth_edge_line(&|e| e.from == *node && e.label.is_none(), 0)
            }
            FlowchartError::LabeledNonDecisionEdge(node) => {
                nth_edge_line(&|e| e.from == *node && e.label.is_some(), 0)
            }
            FlowchartError::EndHasOutgoing(node) => nth_edge_line(&|e| e.from == *node, 0),
            FlowchartError::StartHasIncoming(node) => nth_edge_line(&|e| e.to == *node, 0),
            FlowchartError::SingleBranchDecision(node) => Some(line_of_node(node)),
            FlowchartError::StartCount(n) if *n > 1 => nodes
                .iter()
                .filter(|n| n.value.kind == NodeKind::Start)
                .nth(1)
                .map(|n| n.line),
            FlowchartError::BadLabel(id) => NodeId::new(id.as_str()).ok().map(|n| line_of_node(&n)),
            _ => None,
        }
        .unwrap_or(first_line);
        let code = match err {
            FlowchartError::DuplicateNode(_) => ParseErrorCode::DuplicateNode,
            FlowchartError::UnknownEndpoint { .. } => ParseErrorCode::UnknownEdgeEndpoint,
            _ => ParseErrorCode::BadFlowchart,
        };
        ParseError::new(code, line, 1, alloc::format!("{err}"))
    })
}

fn is_bare_word(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn push_quoted(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

/// Canonical DSL text for `chart`: optional name line, then nodes and edges
/// in declaration order. Every line ends with `\n`.
pub fn render_flowchart(chart: &Flowchart) -> String {
    let mut out = String::new();
    if !chart.name().is_empty() {
        out.push_str("name ");
        push_quoted(&mut out, chart.name());
        out.push('\n');
    }
    for node in chart.nodes() {
        let _ = write!(out, "node {} {} ", node.id, node.kind);
        push_quoted(&mut out, &node.label);
        if let Some(doc) = &node.doc_ref {
            let _ = write!(out, " ref={doc}");
        }
        out.push('\n');
    }
    for edge in chart.edges() {
        let _ = write!(out, "edge {} {}", edge.from, edge.to);
        if let Some(label) = &edge.label {
            out.push(' ');
            if is_bare_word(label) {
                out.push_str(label);
            } else {
                push_quoted(&mut out, label);
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_chart() {
        let chart = parse_flowchart(
            "node start start \"IRP Start\"\nnode end end \"IRP End\"\nedge start end\n",
        )
        .unwrap();
        assert_eq!(chart.nodes().len(), 2);
        assert_eq!(chart.edges().len(), 1);
    }

    #[test]
    fn comments_forward_refs_and_quoted_labels() {
        let chart = parse_flowchart(
            "# demo\nname \"Demo \\\"chart\\\"\"\nedge s d\nnode s start \"S\"\n\
             node d decision \"Go?\"\nnode a action \"A\" ref=sop_a\nnode e end \"E\"\n\
             edge d a \"go on\"\nedge d e stop\nedge a e\n",
        )
        .unwrap();
        assert_eq!(chart.name(), "Demo \"chart\"");
        assert_eq!(chart.edges()[1].label.as_deref(), Some("go on"));
        assert_eq!(chart.node("a").unwrap().doc_ref.as_ref().unwrap(), "sop_a");
        assert_eq!(parse_flowchart(&render_flowchart(&chart)).unwrap(), chart);
    }

    #[test]
    fn duplicate_decision_label_is_bad_flowchart() {
        let err = parse_flowchart(
            "node s start \"S\"\nnode d decision \"D\"\nnode a action \"A\"\nnode e end \"E\"\n\
             edge s d\nedge d a yes\nedge d e yes\nedge a e\n",
        )
        .unwrap_err();
        assert_eq!(err.code, ParseErrorCode::BadFlowchart);
        assert_eq!(err.line, 7);
    }

    #[test]
    fn duplicate_node_and_unknown_endpoint() {
        let err = parse_flowchart("node s start \"S\"\nnode s end \"E\"\n").unwrap_err();
        assert_eq!(err.code, ParseErrorCode::DuplicateNode);
        assert_eq!((err.line, err.column), (2, 6));

        let err = parse_flowchart("node s start \"S\"\nnode e end \"E\"\nedge s x\n").unwrap_err();
        assert_eq!(err.code, ParseErrorCode::UnknownEdgeEndpoint);
        assert_eq!(err.line, 3);
    }

    #[test]
    fn syntax_errors_point_at_tokens() {
        let err = parse_flowchart("node s begin \"S\"\n").unwrap_err();
        assert_eq!(err.code, ParseErrorCode::BadFlowchart);
        assert_eq!((err.line, err.column), (1, 8));

        let err = parse_flowchart("node s start S\n").unwrap_err();
        assert_eq!(err.column, 14);

        let err = parse_flowchart("node s start \"S\n").unwrap_err();
        assert_eq!(err.column, 14);

        let err = parse_flowchart("link a b\n").unwrap_err();
        assert_eq!(err.code, ParseErrorCode::BadFlowchart);
    }
}
