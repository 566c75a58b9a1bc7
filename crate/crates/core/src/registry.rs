//! Author and venue registries: map DBLP names and venue codes to entity ids.
//!
//! Author ids are a digest of the whitespace-normalized full name, so the
//! same name always yields the same id regardless of insertion order or the
//! number of workers. DBLP homonym suffixes ("Wei Wang 0001") are part of the
//! name and therefore separate people.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::model::{Author, AuthorId, Venue, VenueId, VenueType};
use crate::text::collapse_whitespace;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("empty author name")]
    EmptyName,
    #[error("empty venue code")]
    EmptyVenueCode,
    #[error("id {id} derived for both {first:?} and {second:?}")]
    IdCollision { id: String, first: String, second: String },
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0xf) as usize] as char);
    }
    s
}

/// Registry key for an author name: internal whitespace collapsed, case and
/// diacritics kept.
pub fn normalize_author_key(fullname: &str) -> String {
    collapse_whitespace(fullname)
}

pub fn author_id_for(normalized: &str) -> AuthorId {
    let digest = Sha256::digest(normalized.as_bytes());
    AuthorId::new(hex(&digest[..8]))
}

#[derive(Debug, Clone, Default)]
pub struct AuthorRegistry {
    by_name: BTreeMap<String, AuthorId>,
    authors: BTreeMap<AuthorId, Author>,
}

impl AuthorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn resolve(&mut self, fullname: &str) -> Result<AuthorId, RegistryError> {
        let key = normalize_author_key(fullname);
        if key.is_empty() {
            return Err(RegistryError::EmptyName);
        }
        if let Some(id) = self.by_name.get(&key) {
            return Ok(id.clone());
        }
        let id = author_id_for(&key);
        if let Some(existing) = self.authors.get(&id) {
            return Err(RegistryError::IdCollision {
                id: id.to_string(),
                first: existing.fullname.clone(),
                second: key,
            });
        }
        self.authors.insert(
            id.clone(),
            Author { id: id.clone(), fullname: key.clone(), webpage: None, affiliation_ids: BTreeSet::new() },
        );
        self.by_name.insert(key, id.clone());
        Ok(id)
    }

    pub fn lookup(&self, fullname: &str) -> Option<&AuthorId> {
        self.by_name.get(&normalize_author_key(fullname))
    }

    pub fn get(&self, id: &AuthorId) -> Option<&Author> {
        self.authors.get(id)
    }

    /// Attach a homepage URL to an already registered author. The first URL
    /// seen wins. Returns false if the name is unknown.
    pub fn set_webpage(&mut self, fullname: &str, url: &str) -> bool {
        let Some(id) = self.lookup(fullname).cloned() else {
            return false;
        };
        let author = self.authors.get_mut(&id).expect("registered name has an entity");
        if author.webpage.is_none() {
            author.webpage = Some(url.to_string());
        }
        true
    }

    pub fn len(&self) -> usize {
        self.authors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.authors.is_empty()
    }

    pub fn authors(&self) -> impl Iterator<Item = &Author> {
        self.authors.values()
    }

    pub fn into_authors(self) -> Vec<Author> {
        self.authors.into_values().collect()
    }
}

/// Venue type implied by the first segment of a DBLP venue code.
pub fn venue_type_for(code: &str) -> VenueType {
    match code.split('/').next() {
        Some("conf") => VenueType::ConferenceOrWorkshop,
        Some("journals") => VenueType::Journal,
        _ => VenueType::Other,
    }
}

/// `conf/lrec` → `LREC`.
pub fn acronym_for(code: &str) -> Option<String> {
    let last = code.rsplit('/').next()?.trim();
    (!last.is_empty()).then(|| last.to_uppercase())
}

#[derive(Debug, Clone, Default)]
pub struct VenueRegistry {
    venues: BTreeMap<VenueId, Venue>,
}

impl VenueRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn resolve(&mut self, code: &str) -> Result<VenueId, RegistryError> {
        let code = code.trim();
        if code.is_empty() {
            return Err(RegistryError::EmptyVenueCode);
        }
        if let Some(v) = self.venues.get(code) {
            return Ok(v.id.clone());
        }
        let id = VenueId::new(code);
        self.venues.insert(
            id.clone(),
            Venue {
                id: id.clone(),
                names: Vec::new(),
                acronyms: acronym_for(code).into_iter().collect(),
                venue_type: venue_type_for(code),
            },
        );
        Ok(id)
    }

    /// Record a long venue name (booktitle or journal title). Names are kept
    /// sorted and deduplicated so the result does not depend on record order.
    pub fn add_name(&mut self, id: &VenueId, name: &str) {
        let name = collapse_whitespace(name);
        if name.is_empty() {
            return;
        }
        if let Some(v) = self.venues.get_mut(id) {
            if let Err(pos) = v.names.binary_search(&name) {
                v.names.insert(pos, name);
            }
        }
    }

    pub fn get(&self, id: &VenueId) -> Option<&Venue> {
        self.venues.get(id)
    }

    pub fn len(&self) -> usize {
        self.venues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.venues.is_empty()
    }

    pub fn venues(&self) -> impl Iterator<Item = &Venue> {
        self.venues.values()
    }

    pub fn into_venues(self) -> Vec<Venue> {
        self.venues.into_values().collect()
    }
}
