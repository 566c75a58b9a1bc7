use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use super::PublicationFilter;
use crate::model::Publication;

pub const STOPWORDS_VERSION: &str = "en-v1";
pub const STOPWORDS_EN_V1: &str = include_str!("../../data/stopwords-en-v1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextField {
    Title,
    Abstract,
}

impl TextField {
    pub fn as_str(self) -> &'static str {
        match self {
            TextField::Title => "title",
            TextField::Abstract => "abstract",
        }
    }

    fn text(self, p: &Publication) -> Option<&str> {
        match self {
            TextField::Title => Some(p.title.as_str()),
            TextField::Abstract => p.secondary.ocr_abstract.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordSet {
    version: String,
    words: BTreeSet<String>,
}

impl StopwordSet {
    /// One lowercase word per line; `#` starts a comment.
    pub fn parse(version: &str, text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.to_lowercase())
            .collect();
        Self { version: version.to_string(), words }
    }

    pub fn english() -> Self {
        Self::parse(STOPWORDS_VERSION, STOPWORDS_EN_V1)
    }

    pub fn empty() -> Self {
        Self { version: String::from("none"), words: BTreeSet::new() }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Maps a lowercase token to the form it is counted under.
pub trait TermNormalizer {
    fn normalize(&self, token: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityNormalizer;

impl TermNormalizer for IdentityNormalizer {
    fn normalize(&self, token: &str) -> String {
        token.to_string()
    }
}

/// Rule-based plural stripping for English nouns.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnglishSingularizer;

const INVARIANT_ENDINGS: [&str; 4] = ["ss", "us", "is", "ous"];

impl TermNormalizer for EnglishSingularizer {
    fn normalize(&self, token: &str) -> String {
        let n = token.chars().count();
        if n <= 3 || !token.ends_with('s') || INVARIANT_ENDINGS.iter().any(|e| token.ends_with(e)) {
            return token.to_string();
        }
        if let Some(stem) = token.strip_suffix("ies") {
            if n > 4 {
                return alloc::format!("{stem}y");
            }
        }
        for suffix in ["sses", "xes", "ches", "shes"] {
            if token.ends_with(suffix) {
                return token[..token.len() - 2].to_string();
            }
        }
        token[..token.len() - 1].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermTable {
    pub field: TextField,
    pub filter: PublicationFilter,
    /// Sorted by count descending, then term ascending.
    pub entries: Vec<(String, u64)>,
    pub total_tokens: u64,
    pub stopword_tokens: u64,
    /// Tokens without any alphabetic character.
    pub dropped_tokens: u64,
    /// Sum of counts over all terms, including those beyond `top_k`.
    pub counted_tokens: u64,
    pub distinct_terms: usize,
}

fn count_terms<I>(
    pubs: I,
    field: TextField,
    filter: &PublicationFilter,
    stopwords: &StopwordSet,
    normalizer: &dyn TermNormalizer,
) -> (BTreeMap<String, u64>, [u64; 3])
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let (mut total, mut stop, mut dropped) = (0u64, 0u64, 0u64);
    for p in pubs {
        let p = p.borrow();
        if !filter.accepts(p) {
            continue;
        }
        let Some(text) = field.text(p) else { continue };
        for word in text.unicode_words() {
            total += 1;
            let lower = word.to_lowercase();
            if !lower.chars().any(char::is_alphabetic) {
                dropped += 1;
            } else if stopwords.contains(&lower) {
                stop += 1;
            } else {
                *counts.entry(normalizer.normalize(&lower)).or_default() += 1;
            }
        }
    }
    (counts, [total, stop, dropped])
}

fn ranked(counts: &BTreeMap<String, u64>) -> Vec<(String, u64)> {
    let mut entries: Vec<(String, u64)> = counts.iter().map(|(t, c)| (t.clone(), *c)).collect();
    // BTreeMap order is term-ascending; a stable sort by count keeps it on ties.
    entries.sort_by_key(|e| Reverse(e.1));
    entries
}

/// Corpus-wide token counts of `field`, truncated to the `top_k` most
/// frequent terms when given.
pub fn term_frequencies<I>(
    pubs: I,
    field: TextField,
    filter: &PublicationFilter,
    top_k: Option<usize>,
    stopwords: &StopwordSet,
    normalizer: &dyn TermNormalizer,
) -> TermTable
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    let (counts, [total, stop, dropped]) = count_terms(pubs, field, filter, stopwords, normalizer);
    let mut entries = ranked(&counts);
    if let Some(k) = top_k {
        entries.truncate(k);
    }
    TermTable {
        field,
        filter: filter.clone(),
        entries,
        total_tokens: total,
        stopword_tokens: stop,
        dropped_tokens: dropped,
        counted_tokens: counts.values().sum(),
        distinct_terms: counts.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermShift {
    pub term: String,
    pub count_a: u64,
    pub count_b: u64,
}

/// Terms reaching `min_count` in either year, with their counts in both.
/// Sorted by combined count descending, then term.
#[allow(clippy::too_many_arguments)]
pub fn term_shift<I>(
    pubs: I,
    venue: Option<crate::model::VenueId>,
    field: TextField,
    year_a: i32,
    year_b: i32,
    min_count: u64,
    stopwords: &StopwordSet,
    normalizer: &dyn TermNormalizer,
) -> Vec<TermShift>
where
    I: IntoIterator + Clone,
    I::Item: Borrow<Publication>,
{
    let fa = PublicationFilter::year(year_a).with_venue(venue.clone());
    let fb = PublicationFilter::year(year_b).with_venue(venue);
    let (a, _) = count_terms(pubs.clone(), field, &fa, stopwords, normalizer);
    let (b, _) = count_terms(pubs, field, &fb, stopwords, normalizer);
    let terms: BTreeSet<&String> = a
        .iter()
        .chain(b.iter())
        .filter(|(_, c)| **c >= min_count)
        .map(|(t, _)| t)
        .collect();
    let mut out: Vec<TermShift> = terms
        .into_iter()
        .map(|t| TermShift {
            term: t.clone(),
            count_a: a.get(t).copied().unwrap_or(0),
            count_b: b.get(t).copied().unwrap_or(0),
        })
        .collect();
    out.sort_by_key(|x| Reverse(x.count_a + x.count_b));
    out
}
