use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::dsl::{parse_flowchart_at, render_flowchart};
use super::{column_of, ParseError, ParseErrorCode};
use crate::document::{DocError, DocKind, PlaybookDoc};
use crate::flowchart::Flowchart;
use crate::ids::DocId;
use crate::version::Version;

const FENCE: &str = "---";
const CHART_OPEN: &str = "```flowchart";
const CHART_CLOSE: &str = "```";

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Id,
    Kind,
    Title,
    Version,
    Owner,
    References,
    TechContext,
}

impl Key {
    fn parse(s: &str) -> Option<Key> {
        Some(match s {
            "id" => Key::Id,
            "kind" => Key::Kind,
            "title" => Key::Title,
            "version" => Key::Version,
            "owner" => Key::Owner,
            "references" => Key::References,
            "tech-context" => Key::TechContext,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Key::Id => "id",
            Key::Kind => "kind",
            Key::Title => "title",
            Key::Version => "version",
            Key::Owner => "owner",
            Key::References => "references",
            Key::TechContext => "tech-context",
        }
    }
}

struct Field<'a> {
    value: &'a str,
    line: usize,
    column: usize,
}

/// Iterates over lines with the byte offset where each starts.
fn lines_with_offsets(source: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    source.split_inclusive('\n').map(move |raw| {
        let start = offset;
        offset += raw.len();
        (start, raw)
    })
}

fn content(raw: &str) -> &str {
    let line = raw.strip_suffix('\n').unwrap_or(raw);
    line.strip_suffix('\r').unwrap_or(line)
}

fn err(code: ParseErrorCode, line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError::new(code, line, column, msg)
}

/// Parses a `.playbook` document. `path` is only used in error reports.
pub fn parse_document(source: &str, path: &str) -> Result<PlaybookDoc, ParseError> {
    parse_inner(source).map_err(|e| e.with_path(path))
}

fn parse_inner(source: &str) -> Result<PlaybookDoc, ParseError> {
    let mut lines = lines_with_offsets(source).enumerate();

    match lines.next() {
        Some((_, (_, raw))) if content(raw) == FENCE => {}
        _ => {
            return Err(err(
                ParseErrorCode::BadFrontMatter,
                1,
                1,
                "document must start with a `---` front-matter line",
            ))
        }
    }

    let mut fields: [Option<Field<'_>>; 7] = Default::default();
    let mut closing: Option<(usize, usize)> = None;
    for (idx, (start, raw)) in lines.by_ref() {
        let line_no = idx + 1;
        let line = content(raw);
        if line == FENCE {
            closing = Some((line_no, start + raw.len()));
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(colon) = line.find(':') else {
            return Err(err(
                ParseErrorCode::BadFrontMatter,
                line_no,
                1,
                "expected `key: value`",
            ));
        };
        let key_text = line[..colon].trim();
        let Some(key) = Key::parse(key_text) else {
            return Err(err(
                ParseErrorCode::BadFrontMatter,
                line_no,
                column_of(line, line.len() - line.trim_start().len()),
                alloc::format!("unknown front-matter key `{key_text}`"),
            ));
        };
        let slot = &mut fields[key as usize];
        if let Some(previous) = slot {
            return Err(err(
                ParseErrorCode::BadFrontMatter,
                line_no,
                1,
                alloc::format!("`{}` already set on line {}", key.name(), previous.line),
            ));
        }
        let after = &line[colon + 1..];
        let value = after.trim();
        let value_at = colon + 1 + (after.len() - after.trim_start().len());
        *slot = Some(Field {
            value,
            line: line_no,
            column: column_of(line, value_at),
        });
    }

    let Some((closing_line, body_start)) = closing else {
        return Err(err(
            ParseErrorCode::BadFrontMatter,
            source.lines().count().max(1),
            1,
            "front-matter is not closed by a `---` line",
        ));
    };

    let required = |key: Key| -> Result<&Field<'_>, ParseError> {
        fields[key as usize]
            .as_ref()
            .filter(|f| !f.value.is_empty())
            .ok_or_else(|| {
                err(
                    ParseErrorCode::MissingField,
                    closing_line,
                    1,
                    alloc::format!("front-matter field `{}` is required", key.name()),
                )
            })
    };

    let id_field = required(Key::Id)?;
    let id = DocId::new(id_field.value).map_err(|e| {
        err(
            ParseErrorCode::BadFrontMatter,
            id_field.line,
            id_field.column,
            e.to_string(),
        )
    })?;

    let kind_field = required(Key::Kind)?;
    let kind: DocKind = kind_field.value.parse().map_err(|e: DocError| {
        err(
            ParseErrorCode::BadFrontMatter,
            kind_field.line,
            kind_field.column,
            e.to_string(),
        )
    })?;

    let title = required(Key::Title)?.value.to_string();

    let version_field = required(Key::Version)?;
    let version: Version = version_field
        .value
        .parse()
        .map_err(|e: crate::VersionError| {
            err(
                ParseErrorCode::BadVersion,
                version_field.line,
                version_field.column,
                e.to_string(),
            )
        })?;

    let owner = required(Key::Owner)?.value.to_string();

    let mut references = Vec::new();
    if let Some(field) = &fields[Key::References as usize] {
        if !field.value.is_empty() {
            for item in field.value.split(',') {
                let item = item.trim();
                references.push(DocId::new(item).map_err(|e| {
                    err(
                        ParseErrorCode::BadFrontMatter,
                        field.line,
                        field.column,
                        e.to_string(),
                    )
                })?);
            }
        }
    }

    let mut tech_context = Vec::new();
    if let Some(field) = &fields[Key::TechContext as usize] {
        if !field.value.is_empty() {
            for item in field.value.split(',') {
                let item = item.trim();
                if item.is_empty() {
                    return Err(err(
                        ParseErrorCode::BadFrontMatter,
                        field.line,
                        field.column,
                        "empty tech-context entry",
                    ));
                }
                tech_context.push(item.to_string());
            }
        }
    }

    let rest = &source[body_start..];
    let (body, flowchart) = split_body(rest, closing_line + 1)?;

    let doc = PlaybookDoc {
        id,
        kind,
        title,
        version,
        owner,
        references,
        body: body.to_string(),
        flowchart,
        tech_context,
    };
    doc.validate().map_err(|e| {
        let (code, line) = match &e {
            DocError::UnlistedNodeRef { .. } => (ParseErrorCode::BadFlowchart, closing_line + 1),
            DocError::BadField { field } => (
                ParseErrorCode::BadFrontMatter,
                Key::parse(field)
                    .and_then(|k| fields[k as usize].as_ref())
                    .map_or(1, |f| f.line),
            ),
            DocError::BadTechContext(_) => (
                ParseErrorCode::BadFrontMatter,
                fields[Key::TechContext as usize]
                    .as_ref()
                    .map_or(1, |f| f.line),
            ),
            _ => (
                ParseErrorCode::BadFrontMatter,
                fields[Key::References as usize]
                    .as_ref()
                    .map_or(1, |f| f.line),
            ),
        };
        err(code, line, 1, e.to_string())
    })?;
    Ok(doc)
}

/// Splits the text after the front-matter into the markdown body and the
/// trailing flowchart block. `first_line` is the line number of `rest`'s
/// first line.
fn split_body(rest: &str, first_line: usize) -> Result<(&str, Option<Flowchart>), ParseError> {
    // (fence char, run length) of the code block we are inside, if any
    let mut open_fence: Option<(char, usize)> = None;
    let mut lines = lines_with_offsets(rest).enumerate();
    while let Some((idx, (start, raw))) = lines.next() {
        let line = content(raw);
        let run = |c: char| line.chars().take_while(|&x| x == c).count();
        if let Some((c, n)) = open_fence {
            let t = line.trim_end();
            if t.chars().count() >= n && t.chars().all(|x| x == c) {
                open_fence = None;
            }
            continue;
        }
        if line.trim_end() == CHART_OPEN {
            let open_line = first_line + idx;
            let block_start = start + raw.len();
            let mut block_end = None;
            for (_, (inner_start, inner_raw)) in lines.by_ref() {
                if content(inner_raw).trim_end() == CHART_CLOSE {
                    block_end = Some((inner_start, inner_start + inner_raw.len()));
                    break;
                }
            }
            let Some((block_stop, after)) = block_end else {
                return Err(err(
                    ParseErrorCode::BadFlowchart,
                    open_line,
                    1,
                    "flowchart block is not closed",
                ));
            };
            let trailing = &rest[after..];
            if !trailing.trim().is_empty() {
                let extra_line = open_line + rest[start..after].lines().count();
                let message = if trailing.lines().any(|l| l.trim_end() == CHART_OPEN) {
                    "a document may contain at most one flowchart block"
                } else {
                    "the flowchart block must be the last part of the document"
                };
                return Err(err(ParseErrorCode::BadFlowchart, extra_line, 1, message));
            }
            let chart = parse_flowchart_at(&rest[block_start..block_stop], open_line + 1)?;
            return Ok((&rest[..start], Some(chart)));
        }
        for c in ['`', '~'] {
            let n = run(c);
            if n >= 3 {
                open_fence = Some((c, n));
                break;
            }
        }
    }
    Ok((rest, None))
}

/// Canonical text for `doc`. Empty `references` and `tech-context` are
/// omitted; the flowchart, if any, is written as the final block.
pub fn serialize_document(doc: &PlaybookDoc) -> String {
    let mut out = String::new();
    out.push_str(FENCE);
    out.push('\n');
    let mut field = |key: Key, value: &str| {
        out.push_str(key.name());
        out.push_str(": ");
        out.push_str(value);
        out.push('\n');
    };
    field(Key::Id, doc.id.as_str());
    field(Key::Kind, doc.kind.as_str());
    field(Key::Title, &doc.title);
    field(Key::Version, &doc.version.to_string());
    field(Key::Owner, &doc.owner);
    if !doc.references.is_empty() {
        let joined: Vec<&str> = doc.references.iter().map(DocId::as_str).collect();
        field(Key::References, &joined.join(", "));
    }
    if !doc.tech_context.is_empty() {
        field(Key::TechContext, &doc.tech_context.join(", "));
    }
    out.push_str(FENCE);
    out.push('\n');
    out.push_str(&doc.body);
    if let Some(chart) = &doc.flowchart {
        if !doc.body.is_empty() && !doc.body.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(CHART_OPEN);
        out.push('\n');
        out.push_str(&render_flowchart(chart));
        out.push_str(CHART_CLOSE);
        out.push('\n');
    }
    out
}
