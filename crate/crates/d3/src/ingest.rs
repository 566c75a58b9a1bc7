//! Dump ingestion and release diffing.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{SystemTime, UNIX_EPOCH};

use d3_core::diff::{diff_release, ChangeSet};
use d3_core::model::{Author, ElementKind, Publication, PublicationId, RawRecord, Venue};
use d3_core::normalize::{normalize_publication, NormalizeError, NormalizeOptions};
use d3_core::registry::{AuthorRegistry, VenueRegistry};
use log::{debug, warn};
use serde::Serialize;

use crate::store::{Batch, Kind, Store, StoreError, StoreRecord};
use crate::xml::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("duplicate record key {0}")]
    DuplicateKey(String),
}

/// Gregorian year of the current system time.
pub fn current_year() -> i32 {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64);
    // Civil-from-days conversion on the proleptic Gregorian calendar.
    let z = secs.div_euclid(86_400) + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    (yoe + era * 400 + i64::from(month <= 2)) as i32
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub records: usize,
    pub publications: usize,
    pub authors: usize,
    pub venues: usize,
    pub homepages: usize,
    /// Records that are not publications, by element name.
    pub skipped: BTreeMap<String, usize>,
    /// Publication records dropped because they could not be normalized.
    pub rejected: usize,
}

/// Normalized entities of one release, each list sorted by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub publications: Vec<Publication>,
    pub authors: Vec<Author>,
    pub venues: Vec<Venue>,
    pub stats: IngestStats,
}

pub fn build_corpus<I>(records: I, options: &NormalizeOptions) -> Result<Corpus, IngestError>
where
    I: IntoIterator<Item = Result<RawRecord, ParseError>>,
{
    let mut authors = AuthorRegistry::new();
    let mut venues = VenueRegistry::new();
    let mut publications: BTreeMap<PublicationId, Publication> = BTreeMap::new();
    let mut homepages: Vec<(Vec<String>, String)> = Vec::new();
    let mut stats = IngestStats::default();

    for record in records {
        let record = record?;
        stats.records += 1;
        match record.kind {
            ElementKind::Www => {
                if record.key.starts_with("homepages/") {
                    if let Some(url) = record.field("url").filter(|u| !u.is_empty()) {
                        let names = record.fields_named("author").map(|f| f.text.clone()).collect();
                        homepages.push((names, url.to_string()));
                    }
                }
                *stats.skipped.entry(record.kind.tag().to_string()).or_default() += 1;
            }
            ElementKind::MastersThesis => {
                *stats.skipped.entry(record.kind.tag().to_string()).or_default() += 1;
            }
            _ => match normalize_publication(&record, &mut authors, &mut venues, options) {
                Ok(p) => {
                    if publications.contains_key(&p.id) {
                        return Err(IngestError::DuplicateKey(p.id.into_string()));
                    }
                    publications.insert(p.id.clone(), p);
                }
                Err(e @ (NormalizeError::MissingTitle(_) | NormalizeError::Registry { .. })) => {
                    warn!("skipping record: {e}");
                    stats.rejected += 1;
                }
                Err(e @ NormalizeError::UnmappableKind(..)) => {
                    debug!("{e}");
                    *stats.skipped.entry(record.kind.tag().to_string()).or_default() += 1;
                }
            },
        }
    }

    // Homepage records may precede the publications of their author.
    for (names, url) in homepages {
        let mut hit = false;
        for name in &names {
            hit |= authors.set_webpage(name, &url);
        }
        stats.homepages += usize::from(hit);
    }

    let mut authors = authors.into_authors();
    authors.sort_by(|a, b| a.id.cmp(&b.id));
    let mut venues = venues.into_venues();
    venues.sort_by(|a, b| a.id.cmp(&b.id));
    stats.publications = publications.len();
    stats.authors = authors.len();
    stats.venues = venues.len();
    Ok(Corpus { publications: publications.into_values().collect(), authors, venues, stats })
}

/// Write a freshly built corpus into `store` in one commit.
pub fn write_corpus(store: &mut Store, corpus: &Corpus, chunk_size: usize) -> Result<(), StoreError> {
    let mut batch = Batch::new();
    for p in &corpus.publications {
        batch.put(p)?;
    }
    for a in &corpus.authors {
        batch.put(a)?;
    }
    for v in &corpus.venues {
        batch.put(v)?;
    }
    store.commit(batch, chunk_size)?;
    Ok(())
}

/// Compare the stored publications against a new release.
pub fn diff_against_store(store: &Store, corpus: &Corpus) -> Result<ChangeSet, StoreError> {
    let mut old = BTreeMap::new();
    for p in store.scan::<Publication>()? {
        let p = p?;
        old.insert(p.id, p.modified_date);
    }
    Ok(diff_release(&old, &corpus.publications))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ApplyReport {
    pub added: usize,
    pub modified: usize,
    pub removed: usize,
    pub authors_written: usize,
    pub authors_removed: usize,
    pub venues_written: usize,
    pub venues_removed: usize,
}

/// Stage `records` as the complete new content of their kind: changed
/// records are put, records no longer present are tombstoned.
fn sync_kind<T, F>(
    store: &Store,
    batch: &mut Batch,
    records: &[T],
    mut merge: F,
) -> Result<(usize, usize), StoreError>
where
    T: StoreRecord,
    F: FnMut(&T, Option<T>) -> T,
{
    let mut current: BTreeMap<String, String> = BTreeMap::new();
    for r in store.scan_lines(T::KIND)? {
        let (id, line) = r?;
        current.insert(id, line);
    }
    let mut seen = BTreeSet::new();
    let mut written = 0;
    for r in records {
        let id = r.store_id();
        seen.insert(id.to_string());
        let old = current.get(id).map(|l| serde_json::from_str::<T>(l)).transpose()?;
        let merged = merge(r, old);
        let line = serde_json::to_string(&merged)?;
        if current.get(id) != Some(&line) {
            batch.put_line(T::KIND, id, line)?;
            written += 1;
        }
    }
    let mut removed = 0;
    for id in current.keys().filter(|id| !seen.contains(*id)) {
        batch.delete(T::KIND, id)?;
        removed += 1;
    }
    Ok((written, removed))
}

/// Apply a release change set. Modified publications replace the stored
/// record wholesale; derived citation and full-text records of removed
/// publications are tombstoned as well. Authors and venues are brought in
/// line with the new release, keeping affiliations already linked to
/// surviving authors.
pub fn apply_changeset(
    store: &mut Store,
    cs: &ChangeSet,
    corpus: &Corpus,
    chunk_size: usize,
) -> Result<ApplyReport, StoreError> {
    let mut batch = Batch::new();
    for p in cs.added.iter().chain(&cs.modified) {
        batch.put(p)?;
    }
    for id in &cs.removed {
        batch.delete(Kind::Publications, id.as_str())?;
        for kind in [Kind::Citations, Kind::Fulltext] {
            if store.get_line(kind, id.as_str())?.is_some() {
                batch.delete(kind, id.as_str())?;
            }
        }
    }
    let (authors_written, authors_removed) = sync_kind(store, &mut batch, &corpus.authors, |new, old| {
        let mut a = new.clone();
        if let Some(old) = old {
            a.affiliation_ids.extend(old.affiliation_ids);
        }
        a
    })?;
    let (venues_written, venues_removed) = sync_kind(store, &mut batch, &corpus.venues, |new, _| new.clone())?;
    store.commit(batch, chunk_size)?;
    Ok(ApplyReport {
        added: cs.added.len(),
        modified: cs.modified.len(),
        removed: cs.removed.len(),
        authors_written,
        authors_removed,
        venues_written,
        venues_removed,
    })
}
