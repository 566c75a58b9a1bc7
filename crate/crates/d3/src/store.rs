//! Chunked, append-only entity store.
//!
//! Layout under the store root:
//!
//! ```text
//! manifest.json
//! publications/000003-0000.jsonl   one JSON record per line, sorted by id
//! publications/000003-0000.idx     "id<TAB>byte offset" per line, "-" marks a tombstone
//! authors/ venues/ affiliations/ citations/ fulltext/
//! ```
//!
//! A commit writes new chunk files and then atomically replaces
//! `manifest.json`; files not named by the manifest are ignored. Within a
//! kind, later chunks shadow earlier ones for the same id.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use d3_core::model::{Affiliation, Author, CitationLinks, FullTextMetadata, Publication, PublicationId, Venue};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_CHUNK_SIZE: usize = 100_000;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("duplicate id {id} in {kind} batch")]
    DuplicateId { kind: Kind, id: String },
    #[error("invalid record id {0:?}")]
    InvalidId(String),
    #[error("no store at {0}")]
    Missing(PathBuf),
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("corrupt chunk {file}: {message}")]
    Corrupt { file: String, message: String },
    #[error("I/O failure: {0}")]
    IoFailure(#[from] io::Error),
    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Publications,
    Authors,
    Venues,
    Affiliations,
    Citations,
    Fulltext,
}

impl Kind {
    pub const ALL: [Kind; 6] =
        [Kind::Publications, Kind::Authors, Kind::Venues, Kind::Affiliations, Kind::Citations, Kind::Fulltext];

    pub fn dir(self) -> &'static str {
        match self {
            Kind::Publications => "publications",
            Kind::Authors => "authors",
            Kind::Venues => "venues",
            Kind::Affiliations => "affiliations",
            Kind::Citations => "citations",
            Kind::Fulltext => "fulltext",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.dir() == s)
            .ok_or_else(|| format!("unknown kind {s:?}; expected one of publications, authors, venues, affiliations, citations, fulltext"))
    }
}

/// A record type that lives in one store kind.
pub trait StoreRecord: Serialize + DeserializeOwned {
    const KIND: Kind;
    fn store_id(&self) -> &str;
}

impl StoreRecord for Publication {
    const KIND: Kind = Kind::Publications;
    fn store_id(&self) -> &str {
        self.id.as_str()
    }
}

impl StoreRecord for Author {
    const KIND: Kind = Kind::Authors;
    fn store_id(&self) -> &str {
        self.id.as_str()
    }
}

impl StoreRecord for Venue {
    const KIND: Kind = Kind::Venues;
    fn store_id(&self) -> &str {
        self.id.as_str()
    }
}

impl StoreRecord for Affiliation {
    const KIND: Kind = Kind::Affiliations;
    fn store_id(&self) -> &str {
        self.id.as_str()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationRecord {
    pub id: PublicationId,
    pub outgoing: CitationLinks,
    pub incoming: CitationLinks,
    /// Bibliography entries without an in-corpus match.
    pub unresolved: usize,
}

impl StoreRecord for CitationRecord {
    const KIND: Kind = Kind::Citations;
    fn store_id(&self) -> &str {
        self.id.as_str()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FulltextStatus {
    Extracted,
    Rejected,
    Unreachable,
}

/// Outcome of harvesting one publication. Only metadata is kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FulltextRecord {
    pub id: PublicationId,
    pub status: FulltextStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<FullTextMetadata>,
}

impl StoreRecord for FulltextRecord {
    const KIND: Kind = Kind::Fulltext;
    fn store_id(&self) -> &str {
        self.id.as_str()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkMeta {
    pub file: String,
    pub records: usize,
    #[serde(default)]
    pub tombstones: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub generation: u64,
    /// Chunks per kind, oldest first.
    pub kinds: BTreeMap<Kind, Vec<ChunkMeta>>,
}

impl Manifest {
    fn empty() -> Self {
        Self { schema_version: SCHEMA_VERSION, generation: 0, kinds: BTreeMap::new() }
    }

    pub fn chunks(&self, kind: Kind) -> &[ChunkMeta] {
        self.kinds.get(&kind).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Entry {
    Put(String),
    Tombstone,
}

#[derive(Serialize, Deserialize)]
struct TombstoneLine<'a> {
    #[serde(rename = "_tombstone")]
    tombstone: &'a str,
}

/// Pending writes, committed all at once by [`Store::commit`].
#[derive(Debug, Default)]
pub struct Batch {
    entries: BTreeMap<Kind, BTreeMap<String, Entry>>,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['\t', '\n', '\r']) {
        return Err(StoreError::InvalidId(id.to_string()));
    }
    Ok(())
}

impl Batch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(BTreeMap::is_empty)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    fn insert(&mut self, kind: Kind, id: &str, entry: Entry) -> Result<()> {
        check_id(id)?;
        let map = self.entries.entry(kind).or_default();
        if map.contains_key(id) {
            return Err(StoreError::DuplicateId { kind, id: id.to_string() });
        }
        map.insert(id.to_string(), entry);
        Ok(())
    }

    pub fn put<T: StoreRecord>(&mut self, record: &T) -> Result<()> {
        let line = serde_json::to_string(record)?;
        self.insert(T::KIND, record.store_id(), Entry::Put(line))
    }

    /// Put an already serialized record line.
    pub fn put_line(&mut self, kind: Kind, id: &str, line: String) -> Result<()> {
        self.insert(kind, id, Entry::Put(line))
    }

    pub fn delete(&mut self, kind: Kind, id: &str) -> Result<()> {
        self.insert(kind, id, Entry::Tombstone)
    }
}

type ChunkIndex = HashMap<String, (u64, bool)>;

/// A handle on one committed manifest. Readers never observe later commits
/// unless they [`Store::reload`].
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    manifest: Manifest,
    indexes: Mutex<HashMap<String, Arc<ChunkIndex>>>,
}

fn sync_dir(path: &Path) {
    // Directory fsync is best effort; not every platform supports it.
    if let Ok(d) = File::open(path) {
        let _ = d.sync_all();
    }
}

impl Store {
    /// Open an existing store, or initialize an empty one.
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        if root.join(MANIFEST).exists() {
            return Self::open(root);
        }
        for kind in Kind::ALL {
            fs::create_dir_all(root.join(kind.dir()))?;
        }
        let store = Self { root: root.to_path_buf(), manifest: Manifest::empty(), indexes: Mutex::default() };
        store.write_manifest(&store.manifest)?;
        Ok(store)
    }

    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        if !path.exists() {
            return Err(StoreError::Missing(root.to_path_buf()));
        }
        let manifest: Manifest = serde_json::from_slice(&fs::read(&path)?)?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(StoreError::SchemaVersion(manifest.schema_version));
        }
        Ok(Self { root: root.to_path_buf(), manifest, indexes: Mutex::default() })
    }

    pub fn reload(&mut self) -> Result<()> {
        *self = Self::open(&self.root)?;
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn chunk_path(&self, kind: Kind, file: &str) -> PathBuf {
        self.root.join(kind.dir()).join(file)
    }

    fn write_manifest(&self, manifest: &Manifest) -> Result<()> {
        let tmp = self.root.join(format!("{MANIFEST}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, manifest)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.root.join(MANIFEST))?;
        sync_dir(&self.root);
        Ok(())
    }

    fn write_chunk<'a, I>(&self, kind: Kind, file: &str, entries: I) -> Result<ChunkMeta>
    where
        I: IntoIterator<Item = (&'a str, &'a Entry)>,
    {
        fs::create_dir_all(self.root.join(kind.dir()))?;
        let data_path = self.chunk_path(kind, file);
        let idx_path = data_path.with_extension("idx");
        let mut data = BufWriter::new(File::create(&data_path)?);
        let mut idx = BufWriter::new(File::create(&idx_path)?);
        let (mut offset, mut records, mut tombstones) = (0u64, 0usize, 0usize);
        for (id, entry) in entries {
            let line = match entry {
                Entry::Put(line) => {
                    records += 1;
                    writeln!(idx, "{id}\t{offset}")?;
                    line.clone()
                }
                Entry::Tombstone => {
                    tombstones += 1;
                    writeln!(idx, "{id}\t{offset}\t-")?;
                    serde_json::to_string(&TombstoneLine { tombstone: id })?
                }
            };
            data.write_all(line.as_bytes())?;
            data.write_all(b"\n")?;
            offset += line.len() as u64 + 1;
        }
        for w in [data, idx] {
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        Ok(ChunkMeta { file: file.to_string(), records, tombstones })
    }

    /// Write every entry of `batch` into new chunks of at most `chunk_size`
    /// lines and commit them. An empty batch leaves the manifest untouched.
    pub fn commit(&mut self, batch: Batch, chunk_size: usize) -> Result<&Manifest> {
        if batch.is_empty() {
            return Ok(&self.manifest);
        }
        let chunk_size = chunk_size.max(1);
        let mut next = self.manifest.clone();
        next.generation += 1;
        for (kind, entries) in &batch.entries {
            let entries: Vec<(&str, &Entry)> = entries.iter().map(|(k, v)| (k.as_str(), v)).collect();
            for (seq, part) in entries.chunks(chunk_size).enumerate() {
                let file = format!("{:06}-{:04}.jsonl", next.generation, seq);
                let meta = self.write_chunk(*kind, &file, part.iter().copied())?;
                next.kinds.entry(*kind).or_default().push(meta);
            }
            sync_dir(&self.root.join(kind.dir()));
        }
        self.write_manifest(&next)?;
        self.manifest = next;
        Ok(&self.manifest)
    }

    /// Convenience for a single-kind batch.
    pub fn write_entities<'a, T, I>(&mut self, records: I, chunk_size: usize) -> Result<&Manifest>
    where
        T: StoreRecord + 'a,
        I: IntoIterator<Item = &'a T>,
    {
        let mut batch = Batch::new();
        for r in records {
            batch.put(r)?;
        }
        self.commit(batch, chunk_size)
    }

    fn index(&self, kind: Kind, file: &str) -> Result<Arc<ChunkIndex>> {
        let key = format!("{}/{}", kind.dir(), file);
        if let Some(idx) = self.indexes.lock().expect("index cache poisoned").get(&key) {
            return Ok(Arc::clone(idx));
        }
        let path = self.chunk_path(kind, file).with_extension("idx");
        let mut map = HashMap::new();
        for line in BufReader::new(File::open(&path)?).lines() {
            let line = line?;
            let (id, offset, tomb) = parse_idx_line(&line)
                .ok_or_else(|| StoreError::Corrupt { file: key.clone(), message: format!("bad index line {line:?}") })?;
            map.insert(id.to_string(), (offset, tomb));
        }
        let map = Arc::new(map);
        self.indexes.lock().expect("index cache poisoned").insert(key, Arc::clone(&map));
        Ok(map)
    }

    /// Raw JSON line of the live record with `id`, if any.
    pub fn get_line(&self, kind: Kind, id: &str) -> Result<Option<String>> {
        for chunk in self.manifest.chunks(kind).iter().rev() {
            let idx = self.index(kind, &chunk.file)?;
            let Some(&(offset, tomb)) = idx.get(id) else { continue };
            if tomb {
                return Ok(None);
            }
            let mut f = BufReader::new(File::open(self.chunk_path(kind, &chunk.file))?);
            f.seek(SeekFrom::Start(offset))?;
            let mut line = String::new();
            f.read_line(&mut line)?;
            if !line.ends_with('\n') {
                return Err(StoreError::Corrupt { file: chunk.file.clone(), message: format!("truncated record {id}") });
            }
            line.pop();
            return Ok(Some(line));
        }
        Ok(None)
    }

    pub fn get<T: StoreRecord>(&self, id: &str) -> Result<Option<T>> {
        match self.get_line(T::KIND, id)? {
            Some(line) => Ok(Some(serde_json::from_str(&line)?)),
            None => Ok(None),
        }
    }

    /// Live `(id, line)` pairs of a kind in id order.
    pub fn scan_lines(&self, kind: Kind) -> Result<ScanLines> {
        let mut cursors = Vec::new();
        for chunk in self.manifest.chunks(kind) {
            let path = self.chunk_path(kind, &chunk.file);
            cursors.push(Cursor::open(&path, &chunk.file)?);
        }
        Ok(ScanLines { cursors })
    }

    pub fn scan<T: StoreRecord>(&self) -> Result<impl Iterator<Item = Result<T>>> {
        Ok(self.scan_lines(T::KIND)?.map(|r| r.and_then(|(_, line)| Ok(serde_json::from_str(&line)?))))
    }

    pub fn read_all<T: StoreRecord>(&self) -> Result<Vec<T>> {
        self.scan::<T>()?.collect()
    }

    pub fn count(&self, kind: Kind) -> Result<usize> {
        let mut n = 0;
        for r in self.scan_lines(kind)? {
            r?;
            n += 1;
        }
        Ok(n)
    }

    /// Rewrite every kind into fresh chunks holding only live records, then
    /// remove the superseded files.
    pub fn compact(&mut self, chunk_size: usize) -> Result<&Manifest> {
        let chunk_size = chunk_size.max(1);
        let mut next = self.manifest.clone();
        next.generation += 1;
        let mut obsolete = Vec::new();
        for kind in Kind::ALL {
            let old = self.manifest.chunks(kind).to_vec();
            if old.is_empty() {
                continue;
            }
            let mut fresh = Vec::new();
            let mut pending: Vec<(String, Entry)> = Vec::with_capacity(chunk_size.min(1 << 16));
            let mut seq = 0usize;
            let mut flush = |pending: &mut Vec<(String, Entry)>, fresh: &mut Vec<ChunkMeta>| -> Result<()> {
                if pending.is_empty() {
                    return Ok(());
                }
                let file = format!("{:06}-{:04}.jsonl", next.generation, seq);
                seq += 1;
                fresh.push(self.write_chunk(kind, &file, pending.iter().map(|(k, v)| (k.as_str(), v)))?);
                pending.clear();
                Ok(())
            };
            for r in self.scan_lines(kind)? {
                let (id, line) = r?;
                pending.push((id, Entry::Put(line)));
                if pending.len() == chunk_size {
                    flush(&mut pending, &mut fresh)?;
                }
            }
            flush(&mut pending, &mut fresh)?;
            obsolete.extend(old.into_iter().map(|c| (kind, c.file)));
            next.kinds.insert(kind, fresh);
        }
        self.write_manifest(&next)?;
        self.manifest = next;
        self.indexes.lock().expect("index cache poisoned").clear();
        for (kind, file) in obsolete {
            let data = self.chunk_path(kind, &file);
            let _ = fs::remove_file(data.with_extension("idx"));
            let _ = fs::remove_file(data);
        }
        Ok(&self.manifest)
    }

    /// Write all live records of `kind`, one per line, to `out`. A `.gz`
    /// extension selects gzip compression.
    pub fn export(&self, kind: Kind, out: &Path) -> Result<usize> {
        let file = BufWriter::new(File::create(out)?);
        if out.extension().is_some_and(|e| e == "gz") {
            let mut gz = flate2::write::GzEncoder::new(file, flate2::Compression::default());
            let n = self.export_to(kind, &mut gz)?;
            gz.finish()?.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            Ok(n)
        } else {
            let mut file = file;
            let n = self.export_to(kind, &mut file)?;
            file.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            Ok(n)
        }
    }

    fn export_to(&self, kind: Kind, writer: &mut impl Write) -> Result<usize> {
        let mut n = 0;
        for r in self.scan_lines(kind)? {
            let (_, line) = r?;
            writer.write_all(line.as_bytes())?;
            writer.write_all(b"\n")?;
            n += 1;
        }
        Ok(n)
    }

    /// Check that every committed chunk has as many lines as its manifest
    /// entry claims and that lines are sorted by id.
    pub fn verify(&self) -> Result<()> {
        for kind in Kind::ALL {
            for chunk in self.manifest.chunks(kind) {
                let mut cursor = Cursor::open(&self.chunk_path(kind, &chunk.file), &chunk.file)?;
                let (mut records, mut tombstones) = (0, 0);
                let mut prev: Option<String> = None;
                while let Some((id, line)) = cursor.current.take() {
                    if prev.as_deref().is_some_and(|p| p >= id.as_str()) {
                        return Err(StoreError::Corrupt { file: chunk.file.clone(), message: format!("unsorted id {id}") });
                    }
                    if line.is_some() {
                        records += 1;
                    } else {
                        tombstones += 1;
                    }
                    prev = Some(id);
                    cursor.advance()?;
                }
                if records != chunk.records || tombstones != chunk.tombstones {
                    return Err(StoreError::Corrupt {
                        file: chunk.file.clone(),
                        message: format!(
                            "manifest says {}+{} lines, found {records}+{tombstones}",
                            chunk.records, chunk.tombstones
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

fn parse_idx_line(line: &str) -> Option<(&str, u64, bool)> {
    let mut parts = line.split('\t');
    let id = parts.next()?;
    let offset = parts.next()?.parse().ok()?;
    let tomb = match parts.next() {
        None => false,
        Some("-") => true,
        Some(_) => return None,
    };
    Some((id, offset, tomb))
}

struct Cursor {
    file: String,
    data: BufReader<File>,
    idx: BufReader<File>,
    /// Current id and its line (`None` for a tombstone).
    current: Option<(String, Option<String>)>,
}

impl Cursor {
    fn open(path: &Path, file: &str) -> Result<Self> {
        let data = BufReader::new(File::open(path)?);
        let idx = BufReader::new(File::open(path.with_extension("idx"))?);
        let mut c = Self { file: file.to_string(), data, idx, current: None };
        c.advance()?;
        Ok(c)
    }

    fn corrupt(&self, message: String) -> StoreError {
        StoreError::Corrupt { file: self.file.clone(), message }
    }

    fn advance(&mut self) -> Result<()> {
        let mut idx_line = String::new();
        if self.idx.read_line(&mut idx_line)? == 0 {
            self.current = None;
            return Ok(());
        }
        let idx_line = idx_line.trim_end_matches('\n');
        let (id, _, tomb) = parse_idx_line(idx_line).ok_or_else(|| self.corrupt(format!("bad index line {idx_line:?}")))?;
        let id = id.to_string();
        let mut line = String::new();
        if self.data.read_line(&mut line)? == 0 || !line.ends_with('\n') {
            return Err(self.corrupt(format!("missing or truncated record for {id}")));
        }
        line.pop();
        self.current = Some((id, if tomb { None } else { Some(line) }));
        Ok(())
    }
}

/// K-way merge over the chunks of one kind; newer chunks win.
pub struct ScanLines {
    cursors: Vec<Cursor>,
}

impl ScanLines {
    fn step(&mut self) -> Result<Option<(String, String)>> {
        loop {
            let Some(min) = self.cursors.iter().filter_map(|c| c.current.as_ref().map(|(id, _)| id)).min().cloned() else {
                return Ok(None);
            };
            let mut winner: Option<Option<String>> = None;
            for c in self.cursors.iter_mut() {
                if c.current.as_ref().is_some_and(|(id, _)| *id == min) {
                    let (_, line) = c.current.take().expect("checked");
                    // Cursors are ordered oldest first, so the last one wins.
                    winner = Some(line);
                    c.advance()?;
                }
            }
            if let Some(Some(line)) = winner {
                return Ok(Some((min, line)));
            }
        }
    }
}

impl Iterator for ScanLines {
    type Item = Result<(String, String)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.step().transpose()
    }
}
