use alloc::collections::BTreeMap;
use alloc::string::String;
use core::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::model::{Publication, PubType};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeCount {
    pub count: usize,
    pub share: f64,
}

/// Number and share of publications per type. Types without publications
/// are absent from the map.
pub fn counts_by_type<I>(pubs: I) -> BTreeMap<PubType, TypeCount>
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    let mut counts: BTreeMap<PubType, usize> = BTreeMap::new();
    let mut total = 0usize;
    for p in pubs {
        *counts.entry(p.borrow().pub_type).or_default() += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|(t, count)| (t, TypeCount { count, share: count as f64 / total as f64 }))
        .collect()
}

/// Count publications by an arbitrary key (publisher, access, venue, ...).
/// Publications for which `key` returns `None` are counted under `None`.
pub fn counts_by<I, F>(pubs: I, key: F) -> BTreeMap<Option<String>, usize>
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
    F: Fn(&Publication) -> Option<String>,
{
    let mut out = BTreeMap::new();
    for p in pubs {
        *out.entry(key(p.borrow())).or_default() += 1;
    }
    out
}
