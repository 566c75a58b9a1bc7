use std::collections::BTreeSet;
use std::fs;
use std::io::Read;

use d3::store::{Batch, Kind, Store, StoreError};
use d3_core::model::{Author, AuthorId};

fn author(i: usize, name: &str) -> Author {
    Author { id: AuthorId::from(format!("homepages/{i:05}")), fullname: name.to_string(), webpage: None, affiliation_ids: BTreeSet::new() }
}

fn authors(n: usize) -> Vec<Author> {
    (0..n).map(|i| author(i, &format!("Author {i}"))).collect()
}

#[test]
fn ten_thousand_records_in_chunks_of_a_thousand() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::create(dir.path()).unwrap();
    let all = authors(10_000);
    store.write_entities(&all, 1000).unwrap();
    let chunks = store.manifest().chunks(Kind::Authors);
    assert_eq!(chunks.len(), 10);
    assert!(chunks.iter().all(|c| c.records == 1000));
    store.verify().unwrap();

    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.read_all::<Author>().unwrap(), all);
    assert_eq!(reopened.get::<Author>("homepages/07321").unwrap().unwrap().fullname, "Author 7321");
}

#[test]
fn interrupted_commit_leaves_previous_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::create(dir.path()).unwrap();
    let first = authors(30);
    store.write_entities(&first, 10).unwrap();
    let manifest = store.manifest().clone();
    drop(store);

    // Debris of a commit that died after writing chunks but before the
    // manifest rename: a half-written chunk of the next generation and a
    // temporary manifest.
    let next = format!("{:06}-0000", manifest.generation + 1);
    let authors_dir = dir.path().join("authors");
    fs::write(authors_dir.join(format!("{next}.jsonl")), "{\"id\":\"homepages/00001\",\"fullna").unwrap();
    fs::write(authors_dir.join(format!("{next}.idx")), "homepages/00001\t0\n").unwrap();
    fs::write(dir.path().join("manifest.json.tmp"), "{\"schema_version\":1,").unwrap();

    let mut store = Store::open(dir.path()).unwrap();
    assert_eq!(store.manifest(), &manifest);
    assert_eq!(store.read_all::<Author>().unwrap(), first);
    store.verify().unwrap();

    let mut batch = Batch::new();
    batch.put(&author(1, "Renamed")).unwrap();
    batch.delete(Kind::Authors, "homepages/00002").unwrap();
    store.commit(batch, 10).unwrap();
    store.verify().unwrap();

    let reopened = Store::open(dir.path()).unwrap();
    let names: Vec<String> = reopened.read_all::<Author>().unwrap().into_iter().map(|a| a.fullname).collect();
    assert_eq!(names.len(), 29);
    assert_eq!(names[1], "Renamed");
    assert_eq!(names[2], "Author 3");
    assert!(!dir.path().join("manifest.json.tmp").exists());
}

#[test]
fn verify_detects_truncated_chunk() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::create(dir.path()).unwrap();
    store.write_entities(&authors(5), 10).unwrap();
    let file = &store.manifest().chunks(Kind::Authors)[0].file;
    let path = dir.path().join("authors").join(file);
    let text = fs::read_to_string(&path).unwrap();
    let cut = text.trim_end().rfind('\n').unwrap() + 1;
    fs::write(&path, &text[..cut]).unwrap();
    assert!(matches!(Store::open(dir.path()).unwrap().verify(), Err(StoreError::Corrupt { .. })));
}

#[test]
fn compaction_preserves_live_records_and_drops_old_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::create(dir.path()).unwrap();
    store.write_entities(&authors(25), 10).unwrap();
    let mut batch = Batch::new();
    for i in (0..25).step_by(3) {
        batch.delete(Kind::Authors, &format!("homepages/{i:05}")).unwrap();
    }
    batch.put(&author(4, "Changed")).unwrap();
    store.commit(batch, 10).unwrap();
    let before = store.read_all::<Author>().unwrap();
    assert_eq!(before.len(), 16);

    store.compact(7).unwrap();
    let chunks = store.manifest().chunks(Kind::Authors).to_vec();
    assert_eq!(chunks.iter().map(|c| c.records).collect::<Vec<_>>(), [7, 7, 2]);
    assert!(chunks.iter().all(|c| c.tombstones == 0));
    assert_eq!(store.read_all::<Author>().unwrap(), before);
    store.verify().unwrap();

    let on_disk: BTreeSet<String> =
        fs::read_dir(dir.path().join("authors")).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    let expected: BTreeSet<String> =
        chunks.iter().flat_map(|c| [c.file.clone(), c.file.replace(".jsonl", ".idx")]).collect();
    assert_eq!(on_disk, expected);
}

#[test]
fn export_plain_and_gzip() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::create(dir.path().join("s").as_path()).unwrap();
    let all = authors(40);
    store.write_entities(&all, 15).unwrap();

    let plain = dir.path().join("authors.jsonl");
    assert_eq!(store.export(Kind::Authors, &plain).unwrap(), 40);
    let text = fs::read_to_string(&plain).unwrap();

    let gz = dir.path().join("authors.jsonl.gz");
    assert_eq!(store.export(Kind::Authors, &gz).unwrap(), 40);
    let mut unzipped = String::new();
    flate2::read::GzDecoder::new(fs::File::open(&gz).unwrap()).read_to_string(&mut unzipped).unwrap();
    assert_eq!(unzipped, text);

    let parsed: Vec<Author> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, all);
}

#[test]
fn open_missing_and_create_existing() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Store::open(&dir.path().join("none")), Err(StoreError::Missing(_))));
    Store::create(dir.path()).unwrap();
    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.manifest().generation, 0);
}
