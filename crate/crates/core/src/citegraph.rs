//! In-corpus citation graph built from extracted bibliographies.
//!
//! Bibliography entries are linked to publications by normalized title
//! similarity. Edges have set semantics: repeated entries pointing at the
//! same publication collapse to one edge, and self-citations are dropped.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::model::{BibEntry, Publication, PublicationId};
use crate::text::{max_edits, normalize_title, similarity_at_least};

/// Normalized title → publications carrying it.
#[derive(Debug, Clone, Default)]
pub struct TitleIndex {
    by_key: BTreeMap<String, Vec<(PublicationId, Option<i32>)>>,
    /// Keys grouped by length in characters, for the fuzzy pass.
    by_len: BTreeMap<usize, Vec<(Vec<char>, String)>>,
}

impl TitleIndex {
    pub fn insert(&mut self, id: PublicationId, title: &str, year: Option<i32>) {
        let key = normalize_title(title);
        if key.is_empty() {
            return;
        }
        let slot = self.by_key.entry(key.clone()).or_default();
        if slot.is_empty() {
            let chars: Vec<char> = key.chars().collect();
            self.by_len.entry(chars.len()).or_default().push((chars, key));
        }
        let pos = slot.partition_point(|(existing, _)| existing < &id);
        slot.insert(pos, (id, year));
    }

    pub fn key_count(&self) -> usize {
        self.by_key.len()
    }

    pub fn get(&self, normalized_title: &str) -> Option<&[(PublicationId, Option<i32>)]> {
        self.by_key.get(normalized_title).map(Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.by_key.keys().map(String::as_str)
    }
}

pub fn build_title_index<I>(corpus: I) -> TitleIndex
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    let mut index = TitleIndex::default();
    for p in corpus {
        let p = p.borrow();
        index.insert(p.id.clone(), &p.title, p.year);
    }
    index
}

fn pick<'a>(candidates: impl Iterator<Item = &'a (PublicationId, Option<i32>)>, year: Option<i32>) -> Option<PublicationId> {
    candidates
        .min_by(|a, b| {
            let a_year = year.is_some() && a.1 == year;
            let b_year = year.is_some() && b.1 == year;
            b_year.cmp(&a_year).then_with(|| a.0.cmp(&b.0))
        })
        .map(|(id, _)| id.clone())
}

/// Publication whose normalized title is most similar to the entry's, if the
/// similarity reaches `threshold`. Ties prefer a matching year, then the
/// smallest id.
pub fn match_bib_entry(entry: &BibEntry, index: &TitleIndex, threshold: f64) -> Option<PublicationId> {
    let key = normalize_title(&entry.title);
    if key.is_empty() {
        return None;
    }
    if let Some(exact) = index.by_key.get(&key) {
        return pick(exact.iter(), entry.year);
    }
    let query: Vec<char> = key.chars().collect();
    let n = query.len();
    // A candidate of length m needs |m - n| <= max_edits(max(m, n)).
    let lo = n.saturating_sub(max_edits(n, threshold));
    let longest = index.by_len.keys().next_back().copied().unwrap_or(0);
    let mut hi = n;
    while hi < longest && hi - n < max_edits(hi + 1, threshold) {
        hi += 1;
    }
    let query_hist = char_histogram(&query);
    let mut best_score = f64::NEG_INFINITY;
    // Candidates must reach the threshold and, once one is found, tie or beat it.
    let mut bar = threshold;
    let mut best_keys: Vec<&str> = Vec::new();
    for (&len, keys) in index.by_len.range(lo..=hi) {
        let limit = max_edits(n.max(len), bar);
        if n.abs_diff(len) > limit {
            continue;
        }
        for (chars, k) in keys {
            if histogram_distance(&query_hist, chars) > limit {
                continue;
            }
            let Some(score) = similarity_at_least(&query, chars, bar) else {
                continue;
            };
            if score > best_score {
                best_score = score;
                bar = bar.max(score);
                best_keys.clear();
                best_keys.push(k);
            } else if score == best_score {
                best_keys.push(k);
            }
        }
    }
    pick(best_keys.iter().flat_map(|k| index.by_key[*k].iter()), entry.year)
}

const HIST_BUCKETS: usize = 64;

fn char_histogram(chars: &[char]) -> [u16; HIST_BUCKETS] {
    let mut h = [0u16; HIST_BUCKETS];
    for &c in chars {
        let b = &mut h[c as usize % HIST_BUCKETS];
        *b = b.saturating_add(1);
    }
    h
}

/// Lower bound on the edit distance between the histogram's string and
/// `other`: every edit fixes at most one surplus and one deficit.
fn histogram_distance(hist: &[u16; HIST_BUCKETS], other: &[char]) -> usize {
    let theirs = char_histogram(other);
    let (mut surplus, mut deficit) = (0usize, 0usize);
    for (a, b) in hist.iter().zip(&theirs) {
        if a > b {
            surplus += usize::from(a - b);
        } else {
            deficit += usize::from(b - a);
        }
    }
    surplus.max(deficit)
}

/// Resolved targets of one publication's bibliography: deduplicated, sorted,
/// without the publication itself; plus the number of unmatched entries.
pub fn resolve_bibliography(
    source: &PublicationId,
    entries: &[BibEntry],
    index: &TitleIndex,
    threshold: f64,
) -> (Vec<PublicationId>, usize) {
    let mut targets = BTreeSet::new();
    let mut unresolved = 0;
    for e in entries {
        match match_bib_entry(e, index, threshold) {
            Some(t) if &t == source => {}
            Some(t) => {
                targets.insert(t);
            }
            None => unresolved += 1,
        }
    }
    (targets.into_iter().collect(), unresolved)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationGraph {
    pub outgoing: BTreeMap<PublicationId, Vec<PublicationId>>,
    pub incoming: BTreeMap<PublicationId, Vec<PublicationId>>,
    pub unresolved_out: BTreeMap<PublicationId, usize>,
}

impl CitationGraph {
    /// Assemble from per-source resolved targets. Sources with no targets are
    /// omitted from `outgoing`; incoming lists are sorted by citing id.
    pub fn from_resolved<I>(resolved: I) -> Self
    where
        I: IntoIterator<Item = (PublicationId, Vec<PublicationId>, usize)>,
    {
        let mut g = CitationGraph::default();
        for (source, mut targets, unresolved) in resolved {
            targets.sort();
            targets.dedup();
            targets.retain(|t| t != &source);
            if unresolved > 0 {
                g.unresolved_out.insert(source.clone(), unresolved);
            }
            if targets.is_empty() {
                continue;
            }
            for t in &targets {
                g.incoming.entry(t.clone()).or_default().push(source.clone());
            }
            g.outgoing.insert(source, targets);
        }
        for list in g.incoming.values_mut() {
            list.sort();
            list.dedup();
        }
        g
    }

    pub fn in_degree(&self, id: &PublicationId) -> usize {
        self.incoming.get(id).map_or(0, Vec::len)
    }

    pub fn out_degree(&self, id: &PublicationId) -> usize {
        self.outgoing.get(id).map_or(0, Vec::len)
    }

    pub fn edge_count(&self) -> usize {
        self.outgoing.values().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&PublicationId, &PublicationId)> {
        self.outgoing.iter().flat_map(|(s, ts)| ts.iter().map(move |t| (s, t)))
    }

    /// True when `incoming` is exactly the transpose of `outgoing`.
    pub fn is_transpose_consistent(&self) -> bool {
        let mut transposed: BTreeMap<&PublicationId, Vec<&PublicationId>> = BTreeMap::new();
        for (s, t) in self.edges() {
            transposed.entry(t).or_default().push(s);
        }
        for v in transposed.values_mut() {
            v.sort();
        }
        let incoming: BTreeMap<&PublicationId, Vec<&PublicationId>> =
            self.incoming.iter().map(|(k, v)| (k, v.iter().collect())).collect();
        transposed == incoming
    }
}

/// Link every bibliography in `bibliographies` (source id → entries).
pub fn build_graph<'a, I>(bibliographies: I, index: &TitleIndex, threshold: f64) -> CitationGraph
where
    I: IntoIterator<Item = (&'a PublicationId, &'a [BibEntry])>,
{
    CitationGraph::from_resolved(bibliographies.into_iter().map(|(id, entries)| {
        let (targets, unresolved) = resolve_bibliography(id, entries, index, threshold);
        (id.clone(), targets, unresolved)
    }))
}

/// Degree histogram buckets as inclusive lower bounds.
pub const DEGREE_BUCKETS: [usize; 9] = [0, 1, 2, 5, 10, 20, 50, 100, 1000];

pub fn bucket_label(i: usize) -> String {
    use alloc::format;
    let lo = DEGREE_BUCKETS[i];
    match DEGREE_BUCKETS.get(i + 1) {
        Some(&next) if next == lo + 1 => format!("{lo}"),
        Some(&next) => format!("{lo}-{}", next - 1),
        None => format!("{lo}+"),
    }
}

pub fn bucket_of(degree: usize) -> usize {
    DEGREE_BUCKETS.partition_point(|&lo| lo <= degree) - 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationStats {
    pub corpus_size: usize,
    pub mean_in: f64,
    pub mean_out: f64,
    pub median_in: f64,
    pub median_out: f64,
    pub zero_in_count: usize,
    pub zero_in_share: f64,
    pub one_in_count: usize,
    pub one_in_share: f64,
    pub histogram_in: Vec<(String, usize)>,
    pub histogram_out: Vec<(String, usize)>,
}

fn median(sorted: &[usize]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2] as f64,
        n => (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0,
    }
}

fn histogram(degrees: &[usize]) -> Vec<(String, usize)> {
    let mut counts = [0usize; DEGREE_BUCKETS.len()];
    for &d in degrees {
        counts[bucket_of(d)] += 1;
    }
    counts.iter().enumerate().map(|(i, &c)| (bucket_label(i), c)).collect()
}

fn share(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

/// Degree statistics over a corpus of `corpus_size` publications; papers
/// absent from the graph count with degree zero.
pub fn citation_stats(graph: &CitationGraph, corpus_size: usize) -> CitationStats {
    let pad = |mut v: Vec<usize>| {
        v.resize(corpus_size.max(v.len()), 0);
        v.sort_unstable();
        v
    };
    let ins = pad(graph.incoming.values().map(Vec::len).collect());
    let outs = pad(graph.outgoing.values().map(Vec::len).collect());
    let n = ins.len();
    let zero_in = ins.iter().filter(|&&d| d == 0).count();
    let one_in = ins.iter().filter(|&&d| d == 1).count();
    let mean = |v: &[usize]| if v.is_empty() { 0.0 } else { v.iter().sum::<usize>() as f64 / v.len() as f64 };
    CitationStats {
        corpus_size: n,
        mean_in: mean(&ins),
        mean_out: mean(&outs),
        median_in: median(&ins),
        median_out: median(&outs),
        zero_in_count: zero_in,
        zero_in_share: share(zero_in, n),
        one_in_count: one_in,
        one_in_share: share(one_in, n),
        histogram_in: histogram(&ins),
        histogram_out: histogram(&outs),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("external citation count unavailable for {0}")]
pub struct LookupUnavailable(pub PublicationId);

/// Source of a publication's total incoming-citation count from outside the corpus.
pub trait CitationLookup {
    fn external_incoming(&self, id: &PublicationId) -> Result<u64, LookupUnavailable>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalShare {
    pub share: f64,
    pub in_corpus: u64,
    pub external_total: u64,
    pub used: usize,
    pub skipped: Vec<PublicationId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExternalShareError {
    #[error("no publications in the sample")]
    EmptySample,
    #[error("every lookup failed ({} ids)", .0.len())]
    AllLookupsFailed(Vec<PublicationId>),
}

/// Fraction of incoming citations that come from outside the corpus,
/// `1 - in_corpus / external_total`, aggregated over the sample and clamped
/// to `[0, 1]`. Ids whose lookup fails are skipped and listed.
pub fn external_citation_share<L: CitationLookup + ?Sized>(
    sample_ids: &[PublicationId],
    graph: &CitationGraph,
    lookup: &L,
) -> Result<ExternalShare, ExternalShareError> {
    if sample_ids.is_empty() {
        return Err(ExternalShareError::EmptySample);
    }
    let mut in_corpus = 0u64;
    let mut external_total = 0u64;
    let mut used = 0;
    let mut skipped = Vec::new();
    for id in sample_ids {
        match lookup.external_incoming(id) {
            Ok(total) => {
                in_corpus += graph.in_degree(id) as u64;
                external_total += total;
                used += 1;
            }
            Err(LookupUnavailable(id)) => skipped.push(id),
        }
    }
    if used == 0 {
        return Err(ExternalShareError::AllLookupsFailed(skipped));
    }
    let share = if external_total == 0 {
        0.0
    } else {
        (1.0 - in_corpus as f64 / external_total as f64).clamp(0.0, 1.0)
    };
    Ok(ExternalShare { share, in_corpus, external_total, used, skipped })
}
