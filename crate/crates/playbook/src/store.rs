//! On-disk playbook repository: one `.playbook` file per document.
//!
//! Writes go to a hidden temporary file in the target directory, are synced,
//! and then renamed over the destination, so a crash leaves either the old or
//! the new bytes. Leftover temporary files are removed when a store opens.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use chrono::NaiveDate;
use playbook_core::{
    lint_repository, parse_document, serialize_document, DocError, DocId, DocKind, FindingCode,
    LintFinding, LintReport, PlaybookDoc, Severity, Version,
};
use serde::Serialize;

pub const DOC_EXTENSION: &str = "playbook";
const TMP_MARKER: &str = ".tmp-";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("repository root `{0}` does not exist or is not a directory")]
    RootNotFound(PathBuf),
    #[error("unknown document `{0}`")]
    UnknownDoc(String),
    #[error("invalid document: {0}")]
    InvalidDocument(#[from] DocError),
    #[error("version conflict on `{id}`: expected {}, stored {}", show(.expected), show(.actual))]
    VersionConflict {
        id: DocId,
        expected: Option<Version>,
        actual: Option<Version>,
    },
    #[error("saving `{id}` would introduce {} lint error(s)", .findings.len())]
    LintRejected {
        id: DocId,
        findings: Vec<LintFinding>,
    },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn show(v: &Option<Version>) -> String {
    v.as_ref()
        .map_or_else(|| "no document".to_string(), Version::to_string)
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::RootNotFound(_) => "RootNotFound",
            StoreError::UnknownDoc(_) => "UnknownDoc",
            StoreError::InvalidDocument(_) => "InvalidDocument",
            StoreError::VersionConflict { .. } => "VersionConflict",
            StoreError::LintRejected { .. } => "LintRejected",
            StoreError::Io { .. } => "IoError",
        }
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
        move |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Writes `bytes` to `path` via a synced temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}{TMP_MARKER}{}-{}",
        name.to_string_lossy(),
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));

    let result = (|| {
        let mut file = File::create_new(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        drop(file);
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result?;
    // Persist the rename itself.
    #[cfg(unix)]
    File::open(dir)?.sync_all()?;
    Ok(())
}

fn is_hidden(entry: &walkdir::DirEntry) -> bool {
    entry.depth() > 0 && entry.file_name().to_string_lossy().starts_with('.')
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .display()
        .to_string()
}

/// Parses every `*.playbook` file under `root` (hidden directories are
/// skipped). Unreadable or unparseable files become error findings keyed by
/// their path; the returned report also carries the full repository lint.
pub fn load_repository(
    root: &Path,
    today: NaiveDate,
    stale_after_days: u32,
) -> Result<(Vec<(PathBuf, PlaybookDoc)>, LintReport), StoreError> {
    if !root.is_dir() {
        return Err(StoreError::RootNotFound(root.to_path_buf()));
    }
    let mut docs = Vec::new();
    let mut findings = Vec::new();
    let walker = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| !is_hidden(e));
    for entry in walker {
        let entry = match entry {
            Ok(entry) => entry,
            Err(err) => {
                let path = err.path().map(|p| relative(root, p)).unwrap_or_default();
                findings.push(LintFinding::new(
                    FindingCode::ReadError,
                    path,
                    err.to_string(),
                ));
                continue;
            }
        };
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|x| x != DOC_EXTENSION) {
            continue;
        }
        let rel = relative(root, path);
        let text = match fs::read(path).map(String::from_utf8) {
            Ok(Ok(text)) => text,
            Ok(Err(_)) => {
                findings.push(LintFinding::new(
                    FindingCode::ReadError,
                    rel,
                    "file is not valid UTF-8",
                ));
                continue;
            }
            Err(err) => {
                findings.push(LintFinding::new(
                    FindingCode::ReadError,
                    rel,
                    err.to_string(),
                ));
                continue;
            }
        };
        match parse_document(&text, &rel) {
            Ok(doc) => docs.push((path.to_path_buf(), doc)),
            Err(err) => findings.push(LintFinding::new(
                FindingCode::ParseError,
                rel,
                err.to_string(),
            )),
        }
    }
    let plain: Vec<PlaybookDoc> = docs.iter().map(|(_, d)| d.clone()).collect();
    let mut report = lint_repository(&plain, today, stale_after_days);
    report.extend(findings);
    Ok((docs, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct DocSummary {
    pub id: DocId,
    pub kind: DocKind,
    pub title: String,
    pub version: Version,
    pub stale: bool,
}

#[derive(Debug, Default)]
struct StoreState {
    docs: BTreeMap<DocId, (PathBuf, PlaybookDoc)>,
    /// Findings about files that could not be loaded at all.
    load_findings: Vec<LintFinding>,
}

/// A loaded repository with serialized, optimistic, lint-gated writes.
#[derive(Debug)]
pub struct RepositoryStore {
    root: PathBuf,
    state: RwLock<StoreState>,
    write_lock: Mutex<()>,
}

impl RepositoryStore {
    /// Opens `root`, removing temporary files left behind by interrupted saves.
    pub fn open(root: impl Into<PathBuf>) -> Result<RepositoryStore, StoreError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(StoreError::RootNotFound(root));
        }
        for entry in walkdir::WalkDir::new(&root)
            .into_iter()
            .filter_entry(|e| !is_hidden(e) || e.file_type().is_file())
            .flatten()
        {
            let name = entry.file_name().to_string_lossy();
            if entry.file_type().is_file() && name.starts_with('.') && name.contains(TMP_MARKER) {
                let _ = fs::remove_file(entry.path());
            }
        }
        let store = RepositoryStore {
            root,
            state: RwLock::new(StoreState::default()),
            write_lock: Mutex::new(()),
        };
        store.reload()?;
        Ok(store)
    }

    /// Re-reads every document from disk.
    pub fn reload(&self) -> Result<(), StoreError> {
        // The date only affects staleness warnings, which are recomputed on demand.
        let (docs, report) = load_repository(&self.root, NaiveDate::MIN, u32::MAX)?;
        let mut state = StoreState::default();
        for (path, doc) in docs {
            state.docs.entry(doc.id.clone()).or_insert((path, doc));
        }
        state.load_findings = report
            .findings()
            .iter()
            .filter(|f| matches!(f.code, FindingCode::ParseError | FindingCode::ReadError))
            .cloned()
            .collect();
        // Duplicate ids are only visible from the file list.
        let mut seen = BTreeSet::new();
        for f in report.findings() {
            if f.code == FindingCode::DuplicateDocId && seen.insert(f.doc.clone()) {
                state.load_findings.push(f.clone());
            }
        }
        *self.state.write().unwrap() = state;
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn documents(&self) -> Vec<PlaybookDoc> {
        let state = self.state.read().unwrap();
        state.docs.values().map(|(_, d)| d.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<PlaybookDoc> {
        let state = self.state.read().unwrap();
        state.docs.get(id).map(|(_, d)| d.clone())
    }

    pub fn path_of(&self, id: &str) -> Option<PathBuf> {
        let state = self.state.read().unwrap();
        state.docs.get(id).map(|(p, _)| p.clone())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.state.read().unwrap().docs.contains_key(id)
    }

    pub fn lint(&self, today: NaiveDate, stale_after_days: u32) -> LintReport {
        let state = self.state.read().unwrap();
        let docs: Vec<PlaybookDoc> = state.docs.values().map(|(_, d)| d.clone()).collect();
        let mut report = lint_repository(&docs, today, stale_after_days);
        report.extend(state.load_findings.iter().cloned());
        report
    }

    pub fn summaries(&self, today: NaiveDate, stale_after_days: u32) -> Vec<DocSummary> {
        let state = self.state.read().unwrap();
        state
            .docs
            .values()
            .map(|(_, d)| DocSummary {
                id: d.id.clone(),
                kind: d.kind,
                title: d.title.clone(),
                version: d.version,
                stale: d.version.days_since_review(today) > i64::from(stale_after_days),
            })
            .collect()
    }

    /// Persists `doc` if the stored version's (major, minor, patch) equals
    /// `expected` (`None`: the document must not exist yet) and the change
    /// introduces no new lint errors.
    pub fn save_document(
        &self,
        doc: &PlaybookDoc,
        expected: Option<&Version>,
    ) -> Result<Version, StoreError> {
        doc.validate()?;
        let _guard = self.write_lock.lock().unwrap();

        let (path, before) = {
            let state = self.state.read().unwrap();
            let current = state.docs.get(&doc.id);
            let actual = current.map(|(_, d)| &d.version);
            let matches = match (expected, actual) {
                (None, None) => true,
                (Some(e), Some(a)) => e.precedence() == a.precedence(),
                _ => false,
            };
            if !matches {
                return Err(StoreError::VersionConflict {
                    id: doc.id.clone(),
                    expected: expected.cloned(),
                    actual: actual.cloned(),
                });
            }
            let path = current
                .map(|(p, _)| p.clone())
                .unwrap_or_else(|| self.root.join(format!("{}.{DOC_EXTENSION}", doc.id)));
            let before: Vec<PlaybookDoc> = state.docs.values().map(|(_, d)| d.clone()).collect();
            (path, before)
        };

        let mut after: Vec<PlaybookDoc> =
            before.iter().filter(|d| d.id != doc.id).cloned().collect();
        after.push(doc.clone());
        let today = doc.version.reviewed;
        let errors = |docs: &[PlaybookDoc]| -> BTreeSet<(String, String, String)> {
            lint_repository(docs, today, u32::MAX)
                .findings()
                .iter()
                .filter(|f| f.severity == Severity::Error)
                .map(|f| (f.doc.clone(), f.code.to_string(), f.detail.clone()))
                .collect()
        };
        let old = errors(&before);
        let introduced: Vec<LintFinding> = lint_repository(&after, today, u32::MAX)
            .findings()
            .iter()
            .filter(|f| {
                f.severity == Severity::Error
                    && !old.contains(&(f.doc.clone(), f.code.to_string(), f.detail.clone()))
            })
            .cloned()
            .collect();
        if !introduced.is_empty() {
            return Err(StoreError::LintRejected {
                id: doc.id.clone(),
                findings: introduced,
            });
        }

        write_atomic(&path, serialize_document(doc).as_bytes()).map_err(StoreError::io(&path))?;
        self.state
            .write()
            .unwrap()
            .docs
            .insert(doc.id.clone(), (path, doc.clone()));
        Ok(doc.version)
    }
}
