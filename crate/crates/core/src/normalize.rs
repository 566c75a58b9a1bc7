//! Turning dump records into publication entities.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::model::{Access, AuthorId, ElementKind, Publication, PubType, PublicationId, RawRecord, SecondaryMetadata};
use crate::registry::{AuthorRegistry, RegistryError, VenueRegistry};
use crate::text::collapse_whitespace;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("record {0} has no title")]
    MissingTitle(String),
    #[error("record {0} of kind {1} is not a publication")]
    UnmappableKind(String, &'static str),
    #[error("record {key}: {source}")]
    Registry { key: String, source: RegistryError },
}

#[derive(Debug, Clone, Copy)]
pub struct NormalizeOptions {
    /// Years above this bound (usually the current year + 1) are dropped.
    pub max_year: i32,
    pub min_year: i32,
}

impl NormalizeOptions {
    pub fn for_current_year(year: i32) -> Self {
        Self { max_year: year + 1, min_year: 1900 }
    }
}

const DOI_PREFIXES: [&str; 4] = ["https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "http://dx.doi.org/"];

/// Publication type of a record: `publtype="informal"` wins, otherwise the
/// element kind decides. Master's theses and `www` pages have no type.
pub fn pub_type_of(record: &RawRecord) -> Option<PubType> {
    let informal = record
        .attribute("publtype")
        .is_some_and(|p| p.to_ascii_lowercase().contains("informal"));
    let by_kind = match record.kind {
        ElementKind::Article => PubType::Article,
        ElementKind::InProceedings => PubType::InProceedings,
        ElementKind::Proceedings => PubType::Proceedings,
        ElementKind::Book => PubType::Book,
        ElementKind::InCollection => PubType::InCollection,
        ElementKind::PhdThesis => PubType::PhdThesis,
        ElementKind::MastersThesis | ElementKind::Www => return None,
    };
    Some(if informal { PubType::Informal } else { by_kind })
}

/// Venue code derived from a record key: `conf/acl/Mohammad20b` → `conf/acl`.
/// Only conference, journal and series keys carry a venue.
pub fn venue_code_of(key: &str) -> Option<&str> {
    let mut parts = key.splitn(3, '/');
    let family = parts.next()?;
    let venue = parts.next()?;
    parts.next()?;
    if venue.is_empty() || !matches!(family, "conf" | "journals" | "series") {
        return None;
    }
    Some(&key[..family.len() + 1 + venue.len()])
}

pub fn doi_from_link(link: &str) -> Option<&str> {
    DOI_PREFIXES
        .iter()
        .find_map(|p| link.strip_prefix(p))
        .filter(|d| !d.is_empty())
}

pub fn normalize_publication(
    record: &RawRecord,
    authors: &mut AuthorRegistry,
    venues: &mut VenueRegistry,
    options: &NormalizeOptions,
) -> Result<Publication, NormalizeError> {
    let pub_type = pub_type_of(record)
        .ok_or_else(|| NormalizeError::UnmappableKind(record.key.clone(), record.kind.tag()))?;
    let title = record
        .field("title")
        .map(collapse_whitespace)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| NormalizeError::MissingTitle(record.key.clone()))?;

    let year = record
        .field("year")
        .and_then(|y| y.trim().parse::<i32>().ok())
        .filter(|y| (options.min_year..=options.max_year).contains(y));

    let mut links: Vec<String> = Vec::new();
    let mut open = false;
    for ee in record.fields_named("ee") {
        let link = ee.text.trim();
        if link.is_empty() {
            continue;
        }
        if ee.attribute("type").is_some_and(|t| t.split_whitespace().any(|w| w == "oa")) {
            open = true;
        }
        if !links.iter().any(|l| l == link) {
            links.push(link.to_string());
        }
    }
    let access = if open {
        Access::Open
    } else if links.is_empty() {
        Access::Unknown
    } else {
        Access::Closed
    };
    let doi = links.iter().find_map(|l| doi_from_link(l)).map(str::to_string);

    let mut author_ids: Vec<AuthorId> = Vec::new();
    for name in record.fields_named("author") {
        let id = authors
            .resolve(&name.text)
            .map_err(|source| NormalizeError::Registry { key: record.key.clone(), source })?;
        if !author_ids.contains(&id) {
            author_ids.push(id);
        }
    }

    let venue_id = match venue_code_of(&record.key) {
        Some(code) => {
            let id = venues
                .resolve(code)
                .map_err(|source| NormalizeError::Registry { key: record.key.clone(), source })?;
            for name in ["booktitle", "journal"] {
                if let Some(n) = record.field(name) {
                    venues.add_name(&id, n);
                }
            }
            Some(id)
        }
        None => None,
    };

    let opt_field = |name: &str| {
        record
            .field(name)
            .map(collapse_whitespace)
            .filter(|s| !s.is_empty())
    };

    Ok(Publication {
        id: PublicationId::new(record.key.clone()),
        modified_date: record.mdate,
        title,
        pages: opt_field("pages"),
        year,
        pub_type,
        access,
        links,
        doi,
        publisher: opt_field("publisher"),
        author_ids,
        venue_id,
        secondary: SecondaryMetadata::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RawField;
    use alloc::vec;

    fn record(kind: ElementKind, key: &str, fields: Vec<RawField>) -> RawRecord {
        RawRecord { kind, key: key.into(), mdate: "2021-09-12".parse().unwrap(), attributes: vec![], fields }
    }

    fn opts() -> NormalizeOptions {
        NormalizeOptions::for_current_year(2021)
    }

    fn table1_record() -> RawRecord {
        let mut ee = RawField::new("ee", "https://doi.org/10.18653/v1/2020.acl-demos.27");
        ee.attributes.push(("type".into(), "oa".into()));
        record(
            ElementKind::InProceedings,
            "conf/acl/Mohammad20b",
            vec![
                RawField::new("author", "Saif M. Mohammad"),
                RawField::new("title", "NLP Scholar: An Interactive Visual Explorer for Natural Language Processing Literature."),
                RawField::new("pages", "232-255"),
                RawField::new("year", "2020"),
                RawField::new("booktitle", "ACL (demo)"),
                RawField::new("publisher", "ACL"),
                ee,
            ],
        )
    }

    #[test]
    fn table1_example() {
        let (mut a, mut v) = (AuthorRegistry::new(), VenueRegistry::new());
        let p = normalize_publication(&table1_record(), &mut a, &mut v, &opts()).unwrap();
        assert_eq!(p.id.as_str(), "conf/acl/Mohammad20b");
        assert_eq!(p.modified_date.to_string(), "2021-09-12");
        assert_eq!(p.pub_type, PubType::InProceedings);
        assert_eq!(p.pub_type.dblp_label(), "Conference and Workshop Papers");
        assert_eq!(p.publisher.as_deref(), Some("ACL"));
        assert_eq!(p.doi.as_deref(), Some("10.18653/v1/2020.acl-demos.27"));
        assert_eq!(p.access, Access::Open);
        assert_eq!(p.pages.as_deref(), Some("232-255"));
        assert_eq!(p.year, Some(2020));
        assert_eq!(p.venue_id.as_ref().unwrap().as_str(), "conf/acl");
        assert_eq!(a.get(&p.author_ids[0]).unwrap().fullname, "Saif M. Mohammad");
        assert_eq!(v.get(p.venue_id.as_ref().unwrap()).unwrap().names, ["ACL (demo)"]);
    }

    #[test]
    fn informal_publtype_overrides_kind() {
        let (mut a, mut v) = (AuthorRegistry::new(), VenueRegistry::new());
        let mut r = record(ElementKind::Article, "journals/corr/abs-2001-00001", vec![RawField::new("title", "T")]);
        r.attributes.push(("publtype".into(), "informal".into()));
        let p = normalize_publication(&r, &mut a, &mut v, &opts()).unwrap();
        assert_eq!(p.pub_type, PubType::Informal);
        r.attributes.clear();
        assert_eq!(normalize_publication(&r, &mut a, &mut v, &opts()).unwrap().pub_type, PubType::Article);
    }

    #[test]
    fn kind_mapping() {
        let cases = [
            (ElementKind::InProceedings, PubType::InProceedings),
            (ElementKind::Article, PubType::Article),
            (ElementKind::Proceedings, PubType::Proceedings),
            (ElementKind::Book, PubType::Book),
            (ElementKind::InCollection, PubType::InCollection),
            (ElementKind::PhdThesis, PubType::PhdThesis),
        ];
        for (kind, expected) in cases {
            let r = record(kind, "x/y/z", vec![RawField::new("title", "T")]);
            assert_eq!(pub_type_of(&r), Some(expected));
        }
    }

    #[test]
    fn errors() {
        let (mut a, mut v) = (AuthorRegistry::new(), VenueRegistry::new());
        let r = record(ElementKind::Www, "homepages/58/380", vec![RawField::new("title", "Home Page")]);
        assert_eq!(
            normalize_publication(&r, &mut a, &mut v, &opts()),
            Err(NormalizeError::UnmappableKind("homepages/58/380".into(), "www"))
        );
        let r = record(ElementKind::MastersThesis, "ms/x/y", vec![RawField::new("title", "T")]);
        assert!(matches!(normalize_publication(&r, &mut a, &mut v, &opts()), Err(NormalizeError::UnmappableKind(..))));
        let r = record(ElementKind::Article, "journals/x/y", vec![RawField::new("title", "  ")]);
        assert_eq!(
            normalize_publication(&r, &mut a, &mut v, &opts()),
            Err(NormalizeError::MissingTitle("journals/x/y".into()))
        );
    }

    #[test]
    fn duplicate_authors_collapse_and_years_are_bounded() {
        let (mut a, mut v) = (AuthorRegistry::new(), VenueRegistry::new());
        let r = record(
            ElementKind::Article,
            "journals/x/y",
            vec![
                RawField::new("author", "A B"),
                RawField::new("author", "A  B"),
                RawField::new("title", "T"),
                RawField::new("year", "2099"),
            ],
        );
        let p = normalize_publication(&r, &mut a, &mut v, &opts()).unwrap();
        assert_eq!(p.author_ids.len(), 1);
        assert_eq!(p.year, None);
        assert_eq!(p.access, Access::Unknown);
    }

    #[test]
    fn venue_codes() {
        assert_eq!(venue_code_of("conf/acl/Mohammad20b"), Some("conf/acl"));
        assert_eq!(venue_code_of("journals/corr/abs-2001-00001"), Some("journals/corr"));
        assert_eq!(venue_code_of("phd/us/Smith20"), None);
        assert_eq!(venue_code_of("conf/acl"), None);
    }
}
