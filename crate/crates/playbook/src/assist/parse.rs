//! Tolerant reader for the list-shaped text models return.
//!
//! Recognized item lines: `1. rest`, `1) rest`, `- rest`, `* rest`, `• rest`
//! and `+ rest`. In `rest`, a leading `**Title**` is the title; otherwise the
//! text before the first `: ` (or ` - `) is. Indented lines that follow an
//! item continue its detail.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListItem {
    /// The explicit number of a numbered item.
    pub number: Option<u32>,
    pub title: String,
    pub detail: String,
    /// The whole item text after the marker, emphasis removed.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Line {
    Item(ListItem),
    /// Anything else that is not blank, with markdown emphasis and heading
    /// markers removed.
    Text {
        text: String,
        indented: bool,
    },
}

fn split_marker(line: &str) -> Option<(Option<u32>, &str)> {
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && digits <= 3 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(['.', ')']) {
            if rest.starts_with(char::is_whitespace) {
                return Some((line[..digits].parse().ok(), rest.trim()));
            }
        }
        return None;
    }
    for bullet in ['-', '*', '•', '+'] {
        if let Some(rest) = line.strip_prefix(bullet) {
            if rest.starts_with(char::is_whitespace) {
                return Some((None, rest.trim()));
            }
        }
    }
    None
}

fn trim_separator(s: &str) -> &str {
    s.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, ':' | '-' | '–' | '—'))
        .trim_end()
}

/// Splits item text into (title, detail).
pub fn split_title(rest: &str) -> (String, String) {
    if let Some(inner) = rest.strip_prefix("**") {
        if let Some(end) = inner.find("**") {
            let title = inner[..end].trim().trim_end_matches(':').trim();
            return (
                title.to_string(),
                trim_separator(&inner[end + 2..]).to_string(),
            );
        }
    }
    let rest = strip_emphasis(rest);
    for sep in [": ", " - ", " – ", " — "] {
        if let Some(at) = rest.find(sep) {
            return (
                rest[..at].trim().to_string(),
                rest[at + sep.len()..].trim().to_string(),
            );
        }
    }
    (
        rest.trim().trim_end_matches(':').trim().to_string(),
        String::new(),
    )
}

/// Removes `**`/`__` emphasis and leading `#` heading markers.
pub fn strip_emphasis(s: &str) -> String {
    s.trim()
        .trim_start_matches('#')
        .replace("**", "")
        .replace("__", "")
        .trim()
        .to_string()
}

/// Classifies every non-blank line, folding continuation lines into the
/// item they follow.
pub fn lines(text: &str) -> Vec<Line> {
    let mut out: Vec<Line> = Vec::new();
    for raw in text.lines() {
        if raw.trim().is_empty() {
            continue;
        }
        let indented = raw.starts_with(char::is_whitespace);
        let trimmed = raw.trim();
        if let Some((number, rest)) = split_marker(trimmed) {
            let (title, detail) = split_title(rest);
            out.push(Line::Item(ListItem {
                number,
                title,
                detail,
                text: strip_emphasis(rest),
            }));
            continue;
        }
        if indented {
            if let Some(Line::Item(item)) = out.last_mut() {
                if !item.detail.is_empty() {
                    item.detail.push(' ');
                }
                let more = strip_emphasis(trimmed);
                item.detail.push_str(&more);
                item.text.push(' ');
                item.text.push_str(&more);
                continue;
            }
        }
        out.push(Line::Text {
            text: strip_emphasis(trimmed),
            indented,
        });
    }
    out
}

/// Only the list items, in order.
pub fn list_items(text: &str) -> Vec<ListItem> {
    lines(text)
        .into_iter()
        .filter_map(|l| match l {
            Line::Item(item) => Some(item),
            Line::Text { .. } => None,
        })
        .collect()
}

/// A numbered section heading such as `**3. Containment**` or `## 3. Containment`.
pub fn section_heading(text: &str) -> Option<(u32, String)> {
    let digits = text.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits > 3 {
        return None;
    }
    let rest = text[digits..].strip_prefix('.')?;
    let name = rest.trim();
    (!name.is_empty() && rest.starts_with(char::is_whitespace))
        .then(|| (text[..digits].parse().ok(), name.to_string()))
        .and_then(|(n, name)| n.map(|n| (n, name)))
}
