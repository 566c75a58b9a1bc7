#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use d3::ingest::{build_corpus, write_corpus, Corpus};
use d3::stages::{align_store, build_citation_graph, write_citation_graph};
use d3::store::{Batch, FulltextRecord, FulltextStatus, Store};
use d3::xml::{DumpReader, EntityTable};
use d3_core::model::FullTextMetadata;
use d3_core::normalize::NormalizeOptions;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn d3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d3")).args(args).output().expect("binary runs")
}

/// Run the binary and return stdout, panicking with stderr on failure.
pub fn d3_ok(args: &[&str]) -> String {
    let out = d3(args);
    assert!(
        out.status.success(),
        "d3 {args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

pub fn corpus_from_xml(xml: &str) -> Corpus {
    build_corpus(DumpReader::new(xml.as_bytes(), EntityTable::builtin()), &NormalizeOptions::for_current_year(2021))
        .expect("dump parses")
}

/// Extracted metadata of a sidecar file, rejections dropped.
pub fn sidecar_metadata(path: &Path) -> Vec<FullTextMetadata> {
    std::fs::read_to_string(path)
        .expect("sidecar readable")
        .lines()
        .filter(|l| !l.contains("\"rejected\""))
        .map(|l| serde_json::from_str(l).expect("metadata line"))
        .collect()
}

/// A store built in-process from a fixture directory: the dump, every
/// sidecar record taken as extracted, alignment and the citation graph.
pub fn aligned_store(fixture_dir: &Path, root: &Path) -> Store {
    let xml = std::fs::read_to_string(fixture_dir.join("dump.xml")).expect("dump readable");
    let corpus = corpus_from_xml(&xml);
    let mut store = Store::create(root).expect("store created");
    write_corpus(&mut store, &corpus, 250).expect("corpus written");
    let mut batch = Batch::new();
    for m in sidecar_metadata(&fixture_dir.join("sidecar.jsonl")) {
        batch
            .put(&FulltextRecord { id: m.publication_id.clone(), status: FulltextStatus::Extracted, reason: None, metadata: Some(m) })
            .expect("record staged");
    }
    store.commit(batch, 250).expect("fulltext written");
    align_store(&mut store, 0.8, 250).expect("aligned");
    let (graph, _) = build_citation_graph(&store, 0.8).expect("graph built");
    write_citation_graph(&mut store, &graph, 250).expect("graph written");
    store
}

/// Full CLI pipeline over a fixture directory; returns the report directory.
pub fn cli_pipeline(fixture_dir: &Path, work: &Path, workers: usize) -> PathBuf {
    let store = work.join("store");
    let reports = work.join("reports");
    let s = store.to_str().expect("utf-8 path");
    let w = workers.to_string();
    let f = |name: &str| fixture_dir.join(name).to_str().expect("utf-8 path").to_string();
    d3_ok(&["--workers", &w, "ingest", "--dump", &f("dump.xml"), "--out", s, "--chunk-size", "200"]);
    d3_ok(&[
        "--workers",
        &w,
        "harvest",
        "--store",
        s,
        "--extractor",
        "fixture",
        "--sidecar",
        &f("sidecar.jsonl"),
        "--simulate",
        &f("schedule.json"),
        "--chunk-size",
        "250",
        "--work-dir",
        work.join("scratch").to_str().expect("utf-8 path"),
    ]);
    d3_ok(&["--workers", &w, "align", "--store", s]);
    d3_ok(&["--workers", &w, "citegraph", "build", "--store", s]);
    d3_ok(&["--workers", &w, "report", "all", "--store", s, "--out-dir", reports.to_str().expect("utf-8 path")]);
    reports
}

/// File name to contents for every file of a directory.
pub fn read_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("directory readable")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("file readable"))
        })
        .collect()
}
