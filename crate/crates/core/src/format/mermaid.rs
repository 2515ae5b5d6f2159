use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt::Write;

use crate::flowchart::{Flowchart, NodeKind};

/// Characters that may appear unquoted inside a mermaid node or edge label.
fn plain_label(label: &str) -> bool {
    label.chars().all(|c| {
        c.is_alphanumeric()
            || matches!(
                c,
                ' ' | '_' | '-' | '.' | ',' | ':' | ';' | '?' | '!' | '\'' | '/'
            )
    })
}

fn label_text(label: &str) -> String {
    if plain_label(label) {
        label.into()
    } else {
        alloc::format!("\"{}\"", label.replace('"', "#quot;"))
    }
}

/// `end` is a mermaid keyword; every other node id is emitted unchanged.
fn mermaid_ids(chart: &Flowchart) -> BTreeMap<&str, String> {
    let mut ids = BTreeMap::new();
    for node in chart.nodes() {
        let id = node.id.as_str();
        let out = if id == "end" {
            ["End", "END", "end_"]
                .into_iter()
                .map(String::from)
                .chain((1..).map(|n| alloc::format!("end_{n}")))
                .find(|candidate| !chart.contains(candidate))
                .unwrap_or_default()
        } else {
            id.into()
        };
        ids.insert(id, out);
    }
    ids
}

/// Renders `chart` as a mermaid `flowchart TD` diagram: a header line, one
/// line per node in declaration order, then one line per edge.
pub fn emit_mermaid(chart: &Flowchart) -> String {
    let ids = mermaid_ids(chart);
    let mut out = String::from("flowchart TD\n");
    for node in chart.nodes() {
        let id = &ids[node.id.as_str()];
        let text = label_text(&node.label);
        let _ = match node.kind {
            NodeKind::Start | NodeKind::End => writeln!(out, "{id}({text})"),
            NodeKind::Action => writeln!(out, "{id}[{text}]"),
            NodeKind::Decision => writeln!(out, "{id}{{{text}}}"),
        };
    }
    for edge in chart.edges() {
        let from = &ids[edge.from.as_str()];
        let to = &ids[edge.to.as_str()];
        let _ = match &edge.label {
            Some(label) => writeln!(out, "{from} -->|{}| {to}", label_text(label)),
            None => writeln!(out, "{from} --> {to}"),
        };
    }
    out
}
