//! Incremental updates between two dump releases.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::model::{Publication, PublicationId};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub added: Vec<Publication>,
    pub modified: Vec<Publication>,
    pub removed: Vec<PublicationId>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.modified.is_empty() && self.removed.is_empty()
    }

    pub fn len(&self) -> usize {
        self.added.len() + self.modified.len() + self.removed.len()
    }
}

/// Compare the previous release (`key → mdate`) against the new records.
///
/// A key present in both is modified only when its new `mdate` is strictly
/// later. All three lists are sorted by key.
pub fn diff_release<I>(old_index: &BTreeMap<PublicationId, Date>, new_records: I) -> ChangeSet
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    let mut cs = ChangeSet::default();
    let mut seen: BTreeSet<PublicationId> = BTreeSet::new();
    for item in new_records {
        let p = item.borrow();
        seen.insert(p.id.clone());
        match old_index.get(&p.id) {
            None => cs.added.push(p.clone()),
            Some(old) if p.modified_date > *old => cs.modified.push(p.clone()),
            Some(_) => {}
        }
    }
    cs.removed = old_index.keys().filter(|k| !seen.contains(*k)).cloned().collect();
    cs.added.sort_by(|a, b| a.id.cmp(&b.id));
    cs.modified.sort_by(|a, b| a.id.cmp(&b.id));
    cs
}

/// Apply a change set to an in-memory id → publication map.
pub fn apply_changeset(map: &mut BTreeMap<PublicationId, Publication>, cs: &ChangeSet) {
    for p in cs.added.iter().chain(&cs.modified) {
        map.insert(p.id.clone(), p.clone());
    }
    for id in &cs.removed {
        map.remove(id);
    }
}

pub fn mdate_index<I>(records: I) -> BTreeMap<PublicationId, Date>
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    records
        .into_iter()
        .map(|p| {
            let p = p.borrow();
            (p.id.clone(), p.modified_date)
        })
        .collect()
}
