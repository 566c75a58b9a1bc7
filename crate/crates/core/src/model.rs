//! Entity types shared by every pipeline stage.
//!
//! Field names in the serialized form follow the published dataset schema:
//! the modification date is `mdate`, the publication type is `type`, and
//! citation blocks are `{ "ids": [...], "count": n }`.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::date::Date;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn into_string(self) -> String {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.into())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl core::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// DBLP record key, e.g. `conf/acl/Mohammad20b`.
    #[derive(Default)]
    PublicationId
);
string_id!(
    /// Opaque author identifier derived from the normalized full name.
    AuthorId
);
string_id!(
    /// Venue identifier. This is the DBLP venue code, e.g. `conf/lrec`.
    VenueId
);
string_id!(
    /// Hex SHA-256 digest of the normalized affiliation fields.
    AffiliationId
);

/// Top-level record elements of a DBLP dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Article,
    InProceedings,
    Proceedings,
    Book,
    InCollection,
    PhdThesis,
    MastersThesis,
    Www,
}

impl ElementKind {
    pub const ALL: [ElementKind; 8] = [
        ElementKind::Article,
        ElementKind::InProceedings,
        ElementKind::Proceedings,
        ElementKind::Book,
        ElementKind::InCollection,
        ElementKind::PhdThesis,
        ElementKind::MastersThesis,
        ElementKind::Www,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ElementKind::Article => "article",
            ElementKind::InProceedings => "inproceedings",
            ElementKind::Proceedings => "proceedings",
            ElementKind::Book => "book",
            ElementKind::InCollection => "incollection",
            ElementKind::PhdThesis => "phdthesis",
            ElementKind::MastersThesis => "mastersthesis",
            ElementKind::Www => "www",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

/// One child element of a dump record, e.g. `<ee type="oa">https://...</ee>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawField {
    pub name: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<(String, String)>,
}

impl RawField {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self { name: name.into(), text: text.into(), attributes: Vec::new() }
    }

    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

/// A record element exactly as it appears in the dump, before normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub kind: ElementKind,
    pub key: String,
    pub mdate: Date,
    /// Attributes of the record element other than `key` and `mdate`
    /// (for example `publtype`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<(String, String)>,
    /// Child elements in document order.
    pub fields: Vec<RawField>,
}

impl RawRecord {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields.iter().find(|f| f.name == name).map(|f| f.text.as_str())
    }

    pub fn fields_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a RawField> + 'a {
        self.fields.iter().filter(move |f| f.name == name)
    }
}

/// The seven publication types, in the order of the dataset's type table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PubType {
    InProceedings,
    Article,
    Informal,
    PhdThesis,
    InCollection,
    Proceedings,
    Book,
}

impl PubType {
    pub const ALL: [PubType; 7] = [
        PubType::InProceedings,
        PubType::Article,
        PubType::Informal,
        PubType::PhdThesis,
        PubType::InCollection,
        PubType::Proceedings,
        PubType::Book,
    ];

    /// Row label used in the type table ("in proceedings", "phd thesis", ...).
    pub fn table_label(self) -> &'static str {
        match self {
            PubType::InProceedings => "in proceedings",
            PubType::Article => "article",
            PubType::Informal => "informal",
            PubType::PhdThesis => "phd thesis",
            PubType::InCollection => "in collection",
            PubType::Proceedings => "proceedings",
            PubType::Book => "book",
        }
    }

    /// DBLP's human-readable category name.
    pub fn dblp_label(self) -> &'static str {
        match self {
            PubType::InProceedings => "Conference and Workshop Papers",
            PubType::Article => "Journal Articles",
            PubType::Informal => "Informal and Other Publications",
            PubType::PhdThesis | PubType::Book => "Books and Theses",
            PubType::InCollection => "Parts in Books or Collections",
            PubType::Proceedings => "Editorship",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PubType::InProceedings => "in_proceedings",
            PubType::Article => "article",
            PubType::Informal => "informal",
            PubType::PhdThesis => "phd_thesis",
            PubType::InCollection => "in_collection",
            PubType::Proceedings => "proceedings",
            PubType::Book => "book",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Open,
    Closed,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VenueType {
    ConferenceOrWorkshop,
    Journal,
    Other,
}

impl VenueType {
    pub fn label(self) -> &'static str {
        match self {
            VenueType::ConferenceOrWorkshop => "Conference or Workshop",
            VenueType::Journal => "Journal",
            VenueType::Other => "Other",
        }
    }
}

/// `{ "ids": [...], "count": n }` block for incoming or outgoing citations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationLinks {
    pub ids: Vec<PublicationId>,
    pub count: usize,
}

impl CitationLinks {
    pub fn from_ids(ids: Vec<PublicationId>) -> Self {
        let count = ids.len();
        Self { ids, count }
    }
}

/// Fields recovered from the full text. Every field is optional; an all-empty
/// block means the publication has not been aligned.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondaryMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_abstract: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outgoing: Option<CitationLinks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incoming: Option<CitationLinks>,
}

impl SecondaryMetadata {
    pub fn is_empty(&self) -> bool {
        self == &Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub id: PublicationId,
    #[serde(rename = "mdate")]
    pub modified_date: Date,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(rename = "type")]
    pub pub_type: PubType,
    pub access: Access,
    #[serde(default)]
    pub links: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publisher: Option<String>,
    #[serde(rename = "authors", default)]
    pub author_ids: Vec<AuthorId>,
    #[serde(rename = "venue", default, skip_serializing_if = "Option::is_none")]
    pub venue_id: Option<VenueId>,
    #[serde(flatten)]
    pub secondary: SecondaryMetadata,
}

impl Publication {
    pub fn incoming_count(&self) -> usize {
        self.secondary.incoming.as_ref().map_or(0, |c| c.count)
    }

    pub fn outgoing_count(&self) -> usize {
        self.secondary.outgoing.as_ref().map_or(0, |c| c.count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub id: AuthorId,
    pub fullname: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub webpage: Option<String>,
    #[serde(rename = "affiliations", default, skip_serializing_if = "BTreeSet::is_empty")]
    pub affiliation_ids: BTreeSet<AffiliationId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Venue {
    pub id: VenueId,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default)]
    pub acronyms: Vec<String>,
    #[serde(rename = "type")]
    pub venue_type: VenueType,
}

impl Venue {
    /// The DBLP venue code this entity was created from.
    pub fn code(&self) -> &str {
        self.id.as_str()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AffiliationFields {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postcode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addressline: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affiliation {
    pub id: AffiliationId,
    #[serde(flatten)]
    pub fields: AffiliationFields,
}

/// An author name as printed in the full text, with the affiliation printed next to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffiliationBlock {
    pub author: String,
    pub affiliation: AffiliationFields,
}

/// One parsed bibliography entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BibEntry {
    pub title: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

/// Structured output of a full-text extractor for one publication.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullTextMetadata {
    #[serde(rename = "id")]
    pub publication_id: PublicationId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_abstract: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub affiliations: Vec<AffiliationBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bib_entries: Vec<BibEntry>,
}

