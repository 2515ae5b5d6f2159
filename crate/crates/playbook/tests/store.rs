//! Repository loading, optimistic saves, the lint gate and atomic writes.

mod common;

use std::sync::{Arc, Barrier};

use chrono::NaiveDate;
use common::*;
use playbook::store::{load_repository, write_atomic, RepositoryStore, StoreError};
use playbook_core::{parse_document, DocId, FindingCode, Severity, VersionPart};

fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 7).unwrap()
}

#[test]
fn stolen_device_repository_loads_cleanly() {
    let (docs, report) =
        load_repository(&fixtures_dir().join("stolen_device"), today(), 180).unwrap();
    assert_eq!(docs.len(), 8);
    assert!(!report.has_errors(), "{}", report.to_text());
}

#[test]
fn empty_directory_loads_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, report) = load_repository(dir.path(), today(), 180).unwrap();
    assert!(docs.is_empty());
    assert!(report.is_empty());
}

#[test]
fn missing_root_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let gone = dir.path().join("nope");
    assert!(matches!(
        load_repository(&gone, today(), 180),
        Err(StoreError::RootNotFound(_))
    ));
    assert_eq!(
        RepositoryStore::open(&gone).unwrap_err().code(),
        "RootNotFound"
    );
}

#[test]
fn bad_files_become_findings_and_the_rest_loads() {
    let dir = copy_repo("stolen_device");
    std::fs::write(dir.path().join("binary.playbook"), [0xff, 0xfe, 0x00]).unwrap();
    std::fs::write(dir.path().join("broken.playbook"), "no front matter here\n").unwrap();
    let (docs, report) = load_repository(dir.path(), today(), 180).unwrap();
    assert_eq!(docs.len(), 8);
    let errors: Vec<(FindingCode, &str)> =
        report.errors().map(|f| (f.code, f.doc.as_str())).collect();
    assert_eq!(
        errors,
        vec![
            (FindingCode::ReadError, "binary.playbook"),
            (FindingCode::ParseError, "broken.playbook"),
        ]
    );
    // the store keeps reporting them
    let store = RepositoryStore::open(dir.path()).unwrap();
    assert_eq!(store.lint(today(), 180).errors().count(), 2);
}

#[test]
fn hidden_directories_are_skipped() {
    let dir = copy_repo("stolen_device");
    std::fs::create_dir(dir.path().join(".sessions")).unwrap();
    std::fs::write(dir.path().join(".sessions/junk.playbook"), "junk").unwrap();
    let (docs, report) = load_repository(dir.path(), today(), 180).unwrap();
    assert_eq!(docs.len(), 8);
    assert!(!report.has_errors());
}

#[test]
fn duplicate_ids_are_reported() {
    let dir = copy_repo("stolen_device");
    std::fs::create_dir(dir.path().join("copy")).unwrap();
    std::fs::copy(
        dir.path().join("sop_1.playbook"),
        dir.path().join("copy/sop_1.playbook"),
    )
    .unwrap();
    let store = RepositoryStore::open(dir.path()).unwrap();
    let report = store.lint(today(), 180);
    assert!(report
        .errors()
        .any(|f| f.code == FindingCode::DuplicateDocId));
}

#[test]
fn new_documents_are_saved_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let store = RepositoryStore::open(dir.path()).unwrap();
    let doc = fixture_doc("versioning", "sop_reset_mfa.playbook");
    let stored = store.save_document(&doc, None).unwrap();
    assert_eq!(stored, doc.version);
    let path = dir.path().join("sop_reset_mfa.playbook");
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(parse_document(&text, "x").unwrap(), doc);
    let reopened = RepositoryStore::open(dir.path()).unwrap();
    assert_eq!(reopened.get("sop_reset_mfa"), Some(doc.clone()));
    // creating it again is a conflict
    assert_eq!(
        store.save_document(&doc, None).unwrap_err().code(),
        "VersionConflict"
    );
}

#[test]
fn saves_keep_the_existing_file_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("identity")).unwrap();
    let src = fixtures_dir().join("versioning/sop_reset_mfa.playbook");
    let path = dir.path().join("identity/reset-mfa.playbook");
    std::fs::copy(src, &path).unwrap();
    let store = RepositoryStore::open(dir.path()).unwrap();
    let mut doc = store.get("sop_reset_mfa").unwrap();
    let old = doc.version;
    doc.version = old.bump(VersionPart::Patch, today());
    store.save_document(&doc, Some(&old)).unwrap();
    assert_eq!(store.path_of("sop_reset_mfa").unwrap(), path);
    assert!(std::fs::read_to_string(&path)
        .unwrap()
        .contains("1.2.15.20240107"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn stale_expected_version_conflicts() {
    let dir = copy_repo("versioning");
    let store = RepositoryStore::open(dir.path()).unwrap();
    let doc = store.get("sop_reset_mfa").unwrap();
    let old = doc.version;
    let mut newer = doc.clone();
    newer.version = old.bump(VersionPart::Minor, today());
    store.save_document(&newer, Some(&old)).unwrap();

    let mut stale = doc.clone();
    stale.title = "Reset MFA (edited)".into();
    let err = store.save_document(&stale, Some(&old)).unwrap_err();
    assert!(matches!(err, StoreError::VersionConflict { .. }), "{err}");
    assert_eq!(store.get("sop_reset_mfa").unwrap(), newer);
}

#[test]
fn review_stamps_pass_the_same_gate() {
    let dir = copy_repo("versioning");
    let store = RepositoryStore::open(dir.path()).unwrap();
    let doc = store.get("sop_reset_mfa").unwrap();
    let later = NaiveDate::from_ymd_opt(2024, 6, 1).unwrap();
    let mut stamped = doc.clone();
    stamped.version = doc.version.stamp_reviewed(later).unwrap();
    // the precedence triple is unchanged, so the original expectation holds
    store.save_document(&stamped, Some(&doc.version)).unwrap();
    store
        .save_document(&stamped, Some(&stamped.version))
        .unwrap();
    // a different triple does not
    let wrong = doc.version.bump(VersionPart::Major, later);
    assert_eq!(
        store
            .save_document(&stamped, Some(&wrong))
            .unwrap_err()
            .code(),
        "VersionConflict"
    );
}

#[test]
fn concurrent_writers_produce_exactly_one_conflict() {
    for round in 0..40 {
        let dir = copy_repo("versioning");
        let store = Arc::new(RepositoryStore::open(dir.path()).unwrap());
        let base = store.get("sop_reset_mfa").unwrap();
        let barrier = Arc::new(Barrier::new(2));
        let handles: Vec<_> = [VersionPart::Minor, VersionPart::Patch]
            .into_iter()
            .map(|part| {
                let store = store.clone();
                let barrier = barrier.clone();
                let mut doc = base.clone();
                doc.version = base.version.bump(part, today());
                std::thread::spawn(move || {
                    barrier.wait();
                    store.save_document(&doc, Some(&base.version)).map(|_| doc)
                })
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        let winners: Vec<_> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let conflicts = results
            .iter()
            .filter(|r| matches!(r, Err(StoreError::VersionConflict { .. })))
            .count();
        assert_eq!((winners.len(), conflicts), (1, 1), "round {round}");
        // memory and disk agree on the winner
        assert_eq!(store.get("sop_reset_mfa").as_ref(), Some(winners[0]));
        let reopened = RepositoryStore::open(dir.path()).unwrap();
        assert_eq!(reopened.get("sop_reset_mfa").as_ref(), Some(winners[0]));
    }
}

#[test]
fn saves_introducing_a_cycle_are_rejected() {
    let dir = copy_repo("stolen_device");
    let store = RepositoryStore::open(dir.path()).unwrap();
    let before = std::fs::read_to_string(dir.path().join("sop_3.playbook")).unwrap();
    let mut sop = store.get("sop_3").unwrap();
    // irp_ca references sop_3; pointing back closes a loop
    sop.references.push(DocId::new("irp_ca").unwrap());
    let err = store.save_document(&sop, Some(&sop.version)).unwrap_err();
    match &err {
        StoreError::LintRejected { findings, .. } => {
            assert!(findings.iter().any(|f| f.code == FindingCode::Cycle));
            assert!(findings.iter().all(|f| f.severity == Severity::Error));
        }
        other => panic!("expected LintRejected, got {other}"),
    }
    assert_eq!(
        std::fs::read_to_string(dir.path().join("sop_3.playbook")).unwrap(),
        before
    );
}

#[test]
fn dangling_references_are_rejected_but_existing_errors_do_not_block() {
    let dir = copy_repo("stolen_device");
    std::fs::copy(
        fixtures_dir().join("tabletop_as_drawn/irp_tabletop.playbook"),
        dir.path().join("irp_tabletop.playbook"),
    )
    .unwrap();
    let store = RepositoryStore::open(dir.path()).unwrap();
    assert!(store.lint(today(), 180).has_errors());

    // an unrelated edit still goes through despite the pre-existing DeadEnd
    let mut sop = store.get("sop_1").unwrap();
    sop.body.push_str("\n3. Keep the report number.\n");
    store.save_document(&sop, Some(&sop.version)).unwrap();

    let mut bad = sop.clone();
    bad.references.push(DocId::new("sop_missing").unwrap());
    assert_eq!(
        store
            .save_document(&bad, Some(&sop.version))
            .unwrap_err()
            .code(),
        "LintRejected"
    );
}

#[test]
fn invalid_documents_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let store = RepositoryStore::open(dir.path()).unwrap();
    let mut doc = fixture_doc("versioning", "sop_reset_mfa.playbook");
    doc.references.push(doc.id.clone());
    assert_eq!(
        store.save_document(&doc, None).unwrap_err().code(),
        "InvalidDocument"
    );
}

#[test]
fn leftover_temporary_files_are_removed_on_open() {
    let dir = copy_repo("versioning");
    let tmp = dir.path().join(".sop_reset_mfa.playbook.tmp-1-0");
    std::fs::write(&tmp, "half a docu").unwrap();
    RepositoryStore::open(dir.path()).unwrap();
    assert!(!tmp.exists());
}

#[test]
fn atomic_writes_leave_no_temporary_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    write_atomic(&path, b"one").unwrap();
    write_atomic(&path, b"two").unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), b"two");
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, vec![std::ffi::OsString::from("a.txt")]);
}

#[test]
fn summaries_flag_stale_documents() {
    let store = RepositoryStore::open(fixtures_dir().join("stolen_device")).unwrap();
    let fresh = store.summaries(today(), 180);
    assert_eq!(fresh.len(), 8);
    assert!(fresh.iter().all(|s| !s.stale));
    let later = NaiveDate::from_ymd_opt(2025, 1, 7).unwrap();
    assert!(store.summaries(later, 180).iter().all(|s| s.stale));
}
