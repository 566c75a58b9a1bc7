//! Store-level alignment, audit and citation-graph stages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;
use std::time::Duration;

use d3_core::align::{attach_abstract, attach_affiliations, AffiliationInterner};
use d3_core::audit::AuditItem;
use d3_core::citegraph::{
    build_title_index, resolve_bibliography, CitationGraph, CitationLookup, LookupUnavailable,
};
use d3_core::model::{Affiliation, AffiliationId, Author, AuthorId, CitationLinks, Publication, PublicationId};
use d3_core::registry::{author_id_for, normalize_author_key};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::store::{Batch, CitationRecord, FulltextRecord, FulltextStatus, Store, StoreError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AlignReport {
    pub publications_aligned: usize,
    pub abstracts: usize,
    pub matched_names: usize,
    pub unmatched_names: usize,
    pub author_links: usize,
    pub affiliations: usize,
}

fn extracted(store: &Store) -> Result<Vec<FulltextRecord>, StoreError> {
    let mut out = Vec::new();
    for r in store.scan::<FulltextRecord>()? {
        let r = r?;
        if r.status == FulltextStatus::Extracted && r.metadata.is_some() {
            out.push(r);
        }
    }
    Ok(out)
}

fn author_names(store: &Store) -> Result<HashMap<AuthorId, String>, StoreError> {
    let mut names = HashMap::new();
    for a in store.scan::<Author>()? {
        let a = a?;
        names.insert(a.id, a.fullname);
    }
    Ok(names)
}

fn candidates_of(p: &Publication, names: &HashMap<AuthorId, String>) -> Vec<(AuthorId, String)> {
    p.author_ids
        .iter()
        .map(|id| (id.clone(), names.get(id).cloned().unwrap_or_default()))
        .collect()
}

/// Attach abstracts, keywords and affiliations from extracted full-text
/// metadata to publications and authors.
pub fn align_store(store: &mut Store, threshold: f64, chunk_size: usize) -> Result<AlignReport, StoreError> {
    let texts = extracted(store)?;
    let names = author_names(store)?;
    let mut pubs = Vec::with_capacity(texts.len());
    for t in &texts {
        if let Some(p) = store.get::<Publication>(t.id.as_str())? {
            pubs.push((p, t.metadata.as_ref().expect("filtered above")));
        }
    }

    let results: Vec<_> = pubs
        .par_iter()
        .map(|(p, meta)| {
            let mut interner = AffiliationInterner::new();
            let links = attach_affiliations(meta, &candidates_of(p, &names), threshold, &mut interner);
            (attach_abstract(p, meta), links, interner)
        })
        .collect();

    let mut report = AlignReport::default();
    let mut batch = Batch::new();
    let mut new_links: BTreeMap<AuthorId, BTreeSet<AffiliationId>> = BTreeMap::new();
    let mut affiliations: BTreeMap<AffiliationId, Affiliation> = BTreeMap::new();
    for ((old, _), (updated, links, interner)) in pubs.iter().zip(results) {
        report.publications_aligned += 1;
        report.abstracts += usize::from(updated.secondary.ocr_abstract.is_some());
        report.matched_names += links.matches.iter().filter(|m| m.author_id.is_some()).count();
        report.unmatched_names += links.unmatched.len();
        if &updated != old {
            batch.put(&updated)?;
        }
        for (author, aff) in links.links {
            new_links.entry(author).or_default().insert(aff);
        }
        for a in interner.into_affiliations() {
            affiliations.entry(a.id.clone()).or_insert(a);
        }
    }
    for a in affiliations.values() {
        if store.get_line(crate::store::Kind::Affiliations, a.id.as_str())?.is_none() {
            batch.put(a)?;
        }
    }
    report.affiliations = affiliations.len();
    for (author_id, affs) in new_links {
        report.author_links += affs.len();
        if let Some(mut author) = store.get::<Author>(author_id.as_str())? {
            let before = author.affiliation_ids.len();
            author.affiliation_ids.extend(affs);
            if author.affiliation_ids.len() != before {
                batch.put(&author)?;
            }
        }
    }
    store.commit(batch, chunk_size)?;
    Ok(report)
}

/// Gold labels for the audit: per publication, the DBLP full name behind
/// each extracted name. One JSON object per line:
/// `{"id": "conf/x/Y20", "names": {"S. Mohammad": "Saif M. Mohammad"}}`.
#[derive(Debug, Clone, Deserialize)]
struct GoldLine {
    id: PublicationId,
    names: BTreeMap<String, String>,
}

pub fn load_gold(path: &Path) -> std::io::Result<HashMap<PublicationId, BTreeMap<String, AuthorId>>> {
    let mut out = HashMap::new();
    for (n, line) in std::io::BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let g: GoldLine = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("gold line {}: {e}", n + 1))
        })?;
        let names =
            g.names.into_iter().map(|(k, v)| (k, author_id_for(&normalize_author_key(&v)))).collect();
        out.insert(g.id, names);
    }
    Ok(out)
}

/// One audit item per publication with extracted author names, in id order.
pub fn audit_items(
    store: &Store,
    gold: Option<&HashMap<PublicationId, BTreeMap<String, AuthorId>>>,
) -> Result<Vec<AuditItem>, StoreError> {
    let names = author_names(store)?;
    let mut items = Vec::new();
    for t in extracted(store)? {
        let meta = t.metadata.as_ref().expect("filtered above");
        let mut extracted: Vec<String> = Vec::new();
        for b in &meta.affiliations {
            if !extracted.contains(&b.author) {
                extracted.push(b.author.clone());
            }
        }
        if extracted.is_empty() {
            continue;
        }
        let Some(p) = store.get::<Publication>(t.id.as_str())? else { continue };
        let gold = gold.and_then(|g| g.get(&t.id)).and_then(|labels| {
            extracted.iter().map(|n| labels.get(n).cloned()).collect::<Option<Vec<_>>>()
        });
        items.push(AuditItem { publication_id: t.id, extracted, candidates: candidates_of(&p, &names), gold });
    }
    Ok(items)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CitegraphReport {
    pub publications: usize,
    pub with_bibliography: usize,
    pub bib_entries: usize,
    pub edges: usize,
    pub unresolved: usize,
}

/// Resolve every extracted bibliography against the corpus titles.
pub fn build_citation_graph(store: &Store, threshold: f64) -> Result<(CitationGraph, CitegraphReport), StoreError> {
    let pubs: Vec<Publication> = store.read_all()?;
    let index = build_title_index(pubs.iter());
    let texts = extracted(store)?;
    let bibs: Vec<(&PublicationId, &[d3_core::model::BibEntry])> = texts
        .iter()
        .filter_map(|t| t.metadata.as_ref().map(|m| (&t.id, m.bib_entries.as_slice())))
        .filter(|(_, b)| !b.is_empty())
        .collect();
    let resolved: Vec<(PublicationId, Vec<PublicationId>, usize)> = bibs
        .par_iter()
        .map(|(id, entries)| {
            let (targets, unresolved) = resolve_bibliography(id, entries, &index, threshold);
            ((*id).clone(), targets, unresolved)
        })
        .collect();
    let report = CitegraphReport {
        publications: pubs.len(),
        with_bibliography: bibs.len(),
        bib_entries: bibs.iter().map(|(_, b)| b.len()).sum(),
        edges: 0,
        unresolved: resolved.iter().map(|r| r.2).sum(),
    };
    let graph = CitationGraph::from_resolved(resolved);
    Ok((graph.clone(), CitegraphReport { edges: graph.edge_count(), ..report }))
}

/// Store the graph as citation records and in every publication's
/// secondary block.
pub fn write_citation_graph(store: &mut Store, graph: &CitationGraph, chunk_size: usize) -> Result<(), StoreError> {
    let mut batch = Batch::new();
    let links = |m: &BTreeMap<PublicationId, Vec<PublicationId>>, id: &PublicationId| {
        CitationLinks::from_ids(m.get(id).cloned().unwrap_or_default())
    };
    for p in store.scan::<Publication>()? {
        let mut p = p?;
        let outgoing = links(&graph.outgoing, &p.id);
        let incoming = links(&graph.incoming, &p.id);
        let record = CitationRecord {
            id: p.id.clone(),
            outgoing: outgoing.clone(),
            incoming: incoming.clone(),
            unresolved: graph.unresolved_out.get(&p.id).copied().unwrap_or(0),
        };
        let current: Option<CitationRecord> = store.get(p.id.as_str())?;
        if current.as_ref() != Some(&record) {
            batch.put(&record)?;
        }
        if p.secondary.outgoing.as_ref() != Some(&outgoing) || p.secondary.incoming.as_ref() != Some(&incoming) {
            p.secondary.outgoing = Some(outgoing);
            p.secondary.incoming = Some(incoming);
            batch.put(&p)?;
        }
    }
    store.commit(batch, chunk_size)?;
    Ok(())
}

/// Rebuild the graph from stored citation records.
pub fn load_citation_graph(store: &Store) -> Result<CitationGraph, StoreError> {
    let mut resolved = Vec::new();
    for r in store.scan::<CitationRecord>()? {
        let r = r?;
        resolved.push((r.id, r.outgoing.ids, r.unresolved));
    }
    Ok(CitationGraph::from_resolved(resolved))
}

/// External citation totals read from a JSON object `{"<id>": <count>}`.
#[derive(Debug, Clone, Default)]
pub struct FixtureLookup {
    totals: HashMap<String, u64>,
}

impl FixtureLookup {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let totals = serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self { totals })
    }

    pub fn from_totals(totals: HashMap<String, u64>) -> Self {
        Self { totals }
    }
}

impl CitationLookup for FixtureLookup {
    fn external_incoming(&self, id: &PublicationId) -> Result<u64, LookupUnavailable> {
        self.totals.get(id.as_str()).copied().ok_or_else(|| LookupUnavailable(id.clone()))
    }
}

/// Semantic-Scholar-style lookup: `GET {endpoint}/DOI:{doi}?fields=citationCount`.
/// Publications without a DOI are unavailable.
pub struct HttpLookup {
    endpoint: String,
    dois: HashMap<PublicationId, String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct CitationCount {
    #[serde(rename = "citationCount")]
    citation_count: u64,
}

impl HttpLookup {
    pub fn new(endpoint: &str, dois: HashMap<PublicationId, String>) -> Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder().timeout(Duration::from_secs(30)).build()?;
        Ok(Self { endpoint: endpoint.trim_end_matches('/').to_string(), dois, client })
    }
}

impl CitationLookup for HttpLookup {
    fn external_incoming(&self, id: &PublicationId) -> Result<u64, LookupUnavailable> {
        let unavailable = || LookupUnavailable(id.clone());
        let doi = self.dois.get(id).ok_or_else(unavailable)?;
        let resp = self
            .client
            .get(format!("{}/DOI:{}?fields=citationCount", self.endpoint, doi))
            .send()
            .map_err(|_| unavailable())?;
        if !resp.status().is_success() {
            return Err(unavailable());
        }
        let body = resp.bytes().map_err(|_| unavailable())?;
        serde_json::from_slice::<CitationCount>(&body).map(|c| c.citation_count).map_err(|_| unavailable())
    }
}
