//! Aligning full-text metadata with DBLP entities.
//!
//! Extracted author names are matched against the publication's DBLP authors
//! by normalized Levenshtein similarity. Affiliations are interned by a
//! content digest so that identical blocks on different papers share an id.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{Affiliation, AffiliationFields, AffiliationId, AuthorId, FullTextMetadata, Publication};
use crate::registry::hex;
use crate::text::{collapse_whitespace, meets_threshold, normalize_person_name, similarity_chars};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub extracted_name: String,
    pub author_id: Option<AuthorId>,
    pub score: f64,
}

/// Match extracted names to candidate authors.
///
/// Pairs are claimed greedily in order of descending similarity; equal scores
/// go to the earlier extracted name and then to the earlier candidate. A
/// candidate is claimed at most once. Names left without a candidate at or
/// above `threshold` get `author_id = None` and report their best similarity
/// among the unclaimed candidates.
pub fn match_author_names<S: AsRef<str>>(
    extracted: &[S],
    candidates: &[(AuthorId, String)],
    threshold: f64,
) -> Vec<MatchResult> {
    let ext: Vec<Vec<char>> = extracted.iter().map(|n| normalize_person_name(n.as_ref()).chars().collect()).collect();
    let cand: Vec<Vec<char>> = candidates.iter().map(|(_, n)| normalize_person_name(n).chars().collect()).collect();

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(ext.len() * cand.len());
    for (i, e) in ext.iter().enumerate() {
        for (j, c) in cand.iter().enumerate() {
            pairs.push((similarity_chars(e, c), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut assigned: Vec<Option<(usize, f64)>> = alloc::vec![None; ext.len()];
    let mut claimed = alloc::vec![false; cand.len()];
    for &(score, i, j) in &pairs {
        if !meets_threshold(score, threshold) {
            break;
        }
        if assigned[i].is_none() && !claimed[j] {
            assigned[i] = Some((j, score));
            claimed[j] = true;
        }
    }

    extracted
        .iter()
        .enumerate()
        .map(|(i, name)| match assigned[i] {
            Some((j, score)) => MatchResult {
                extracted_name: String::from(name.as_ref()),
                author_id: Some(candidates[j].0.clone()),
                score,
            },
            None => {
                let best = cand
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !claimed[*j])
                    .map(|(_, c)| similarity_chars(&ext[i], c))
                    .fold(0.0f64, f64::max);
                MatchResult { extracted_name: String::from(name.as_ref()), author_id: None, score: best }
            }
        })
        .collect()
}

fn normalize_opt(s: &Option<String>) -> Option<String> {
    s.as_deref().map(collapse_whitespace).filter(|s| !s.is_empty())
}

/// Whitespace-normalized copy of the fields; empty optionals become absent.
pub fn normalize_affiliation(fields: &AffiliationFields) -> AffiliationFields {
    AffiliationFields {
        name: collapse_whitespace(&fields.name),
        country: normalize_opt(&fields.country),
        city: normalize_opt(&fields.city),
        postcode: normalize_opt(&fields.postcode),
        addressline: normalize_opt(&fields.addressline),
    }
}

pub fn affiliation_id(fields: &AffiliationFields) -> AffiliationId {
    let n = normalize_affiliation(fields);
    let mut h = Sha256::new();
    h.update(n.name.as_bytes());
    for part in [&n.country, &n.city, &n.postcode, &n.addressline] {
        match part {
            Some(v) => {
                h.update([0x1f]);
                h.update(v.as_bytes());
            }
            None => h.update([0x1e]),
        }
    }
    AffiliationId::new(hex(&h.finalize()))
}

#[derive(Debug, Clone, Default)]
pub struct AffiliationInterner {
    entries: BTreeMap<AffiliationId, Affiliation>,
}

impl AffiliationInterner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `None` for blocks whose name is empty after normalization.
    pub fn intern(&mut self, fields: &AffiliationFields) -> Option<AffiliationId> {
        let normalized = normalize_affiliation(fields);
        if normalized.name.is_empty() {
            return None;
        }
        let id = affiliation_id(&normalized);
        self.entries
            .entry(id.clone())
            .or_insert_with(|| Affiliation { id: id.clone(), fields: normalized });
        Some(id)
    }

    pub fn get(&self, id: &AffiliationId) -> Option<&Affiliation> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_affiliations(self) -> Vec<Affiliation> {
        self.entries.into_values().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffiliationLinks {
    pub links: Vec<(AuthorId, AffiliationId)>,
    pub matches: Vec<MatchResult>,
    /// Extracted names that did not reach the threshold.
    pub unmatched: Vec<String>,
}

/// Link each matched author to the affiliations printed next to their name.
/// `candidates` are the publication's DBLP authors in author order.
pub fn attach_affiliations(
    metadata: &FullTextMetadata,
    candidates: &[(AuthorId, String)],
    threshold: f64,
    interner: &mut AffiliationInterner,
) -> AffiliationLinks {
    let mut names: Vec<&str> = Vec::new();
    for block in &metadata.affiliations {
        if !names.contains(&block.author.as_str()) {
            names.push(&block.author);
        }
    }
    let matches = match_author_names(&names, candidates, threshold);
    let mut out = AffiliationLinks::default();
    for m in &matches {
        let Some(author) = &m.author_id else {
            out.unmatched.push(m.extracted_name.clone());
            continue;
        };
        for block in metadata.affiliations.iter().filter(|b| b.author == m.extracted_name) {
            if let Some(aff) = interner.intern(&block.affiliation) {
                let link = (author.clone(), aff);
                if !out.links.contains(&link) {
                    out.links.push(link);
                }
            }
        }
    }
    out.matches = matches;
    out
}

/// Copy title, abstract and keywords from the extractor output into the
/// publication's secondary block. Primary fields are not touched.
pub fn attach_abstract(publication: &Publication, metadata: &FullTextMetadata) -> Publication {
    let mut p = publication.clone();
    p.secondary.ocr_title = metadata.ocr_title.clone();
    p.secondary.ocr_abstract = metadata.ocr_abstract.clone();
    p.secondary.keywords = (!metadata.keywords.is_empty()).then(|| metadata.keywords.clone());
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffiliationBlock, Access, PubType, SecondaryMetadata};
    use crate::text::similarity;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn cands(names: &[&str]) -> Vec<(AuthorId, String)> {
        names.iter().enumerate().map(|(i, n)| (AuthorId::new(alloc::format!("a{i}")), n.to_string())).collect()
    }

    #[test]
    fn exact_names_match_bijectively() {
        let c = cands(&["Saif M. Mohammad", "Jan Philip Wahle", "Terry Ruas"]);
        let r = match_author_names(&["Terry Ruas", "Saif M. Mohammad", "Jan Philip Wahle"], &c, 0.8);
        let ids: Vec<_> = r.iter().map(|m| m.author_id.as_ref().unwrap().as_str()).collect();
        assert_eq!(ids, ["a2", "a0", "a1"]);
        assert!(r.iter().all(|m| m.score == 1.0));
    }

    #[test]
    fn abbreviated_name_against_threshold() {
        let c = cands(&["Saif M. Mohammad"]);
        let s = similarity("s. mohammad", "saif m. mohammad");
        // "s. mohammad" (11 chars) vs "saif m. mohammad" (16 chars): 5 insertions.
        assert_eq!(crate::text::levenshtein("s. mohammad", "saif m. mohammad"), 5);
        assert!((s - (1.0 - 5.0 / 16.0)).abs() < 1e-12);
        let at_08 = match_author_names(&["S. Mohammad"], &c, 0.8);
        assert_eq!(at_08[0].author_id, None);
        assert!(at_08[0].score < 0.8);
        let at_06 = match_author_names(&["S. Mohammad"], &c, 0.6);
        assert_eq!(at_06[0].author_id.as_ref().unwrap().as_str(), "a0");
    }

    #[test]
    fn diacritics_and_case_are_ignored() {
        let c = cands(&["José Müller"]);
        let r = match_author_names(&["JOSE MULLER"], &c, 0.8);
        assert_eq!(r[0].score, 1.0);
    }

    #[test]
    fn empty_input() {
        assert!(match_author_names::<&str>(&[], &cands(&["A"]), 0.8).is_empty());
    }

    #[test]
    fn ties_go_to_earlier_candidate() {
        let c = cands(&["Anna Smith", "Anna Smith"]);
        let r = match_author_names(&["Anna Smith"], &c, 0.8);
        assert_eq!(r[0].author_id.as_ref().unwrap().as_str(), "a0");
    }

    #[test]
    fn candidate_claimed_once() {
        let c = cands(&["Anna Smith"]);
        let r = match_author_names(&["Anna Smith", "Anna Smyth"], &c, 0.5);
        assert_eq!(r[0].author_id.as_ref().unwrap().as_str(), "a0");
        assert_eq!(r[1].author_id, None);
        assert_eq!(r[1].score, 0.0);
    }

    fn table2_fields() -> AffiliationFields {
        AffiliationFields {
            name: "National Research Council Canada".into(),
            country: Some("Canada".into()),
            city: Some("Ottawa".into()),
            postcode: Some("K1A 0R6".into()),
            addressline: Some("1200 Montreal Road, Bldg. M-58".into()),
        }
    }

    fn metadata(blocks: Vec<AffiliationBlock>) -> FullTextMetadata {
        FullTextMetadata { publication_id: "conf/acl/Mohammad20b".into(), affiliations: blocks, ..Default::default() }
    }

    #[test]
    fn table2_affiliation_linked() {
        let c = cands(&["Saif M. Mohammad"]);
        let md = metadata(vec![AffiliationBlock { author: "Saif M. Mohammad".into(), affiliation: table2_fields() }]);
        let mut interner = AffiliationInterner::new();
        let out = attach_affiliations(&md, &c, 0.8, &mut interner);
        assert_eq!(out.links.len(), 1);
        assert_eq!(out.links[0].0.as_str(), "a0");
        let aff = interner.get(&out.links[0].1).unwrap();
        assert_eq!(aff.fields.name, "National Research Council Canada");
        assert_eq!(aff.fields.country.as_deref(), Some("Canada"));
        assert_eq!(aff.fields.city.as_deref(), Some("Ottawa"));
        assert_eq!(aff.id.as_str().len(), 64);
    }

    #[test]
    fn no_blocks_no_links() {
        let mut interner = AffiliationInterner::new();
        let out = attach_affiliations(&metadata(vec![]), &cands(&["A"]), 0.8, &mut interner);
        assert!(out.links.is_empty());
    }

    #[test]
    fn shared_block_shares_id() {
        let c = cands(&["Jan Philip Wahle", "Terry Ruas"]);
        let mut spaced = table2_fields();
        spaced.name = "National  Research Council Canada ".into();
        let md = metadata(vec![
            AffiliationBlock { author: "Jan Philip Wahle".into(), affiliation: table2_fields() },
            AffiliationBlock { author: "Terry Ruas".into(), affiliation: spaced },
        ]);
        let mut interner = AffiliationInterner::new();
        let out = attach_affiliations(&md, &c, 0.8, &mut interner);
        assert_eq!(out.links.len(), 2);
        assert_eq!(out.links[0].1, out.links[1].1);
        assert_eq!(out.links[0].1, affiliation_id(&table2_fields()));
        assert_eq!(interner.len(), 1);
    }

    #[test]
    fn unmatched_names_are_reported() {
        let md = metadata(vec![AffiliationBlock { author: "Zzz Qqq".into(), affiliation: table2_fields() }]);
        let mut interner = AffiliationInterner::new();
        let out = attach_affiliations(&md, &cands(&["Saif M. Mohammad"]), 0.8, &mut interner);
        assert!(out.links.is_empty());
        assert_eq!(out.unmatched, ["Zzz Qqq"]);
    }

    fn publication() -> Publication {
        Publication {
            id: "conf/acl/Mohammad20b".into(),
            modified_date: "2021-09-12".parse().unwrap(),
            title: "NLP Scholar - An Interactive Visual Explorer".into(),
            pages: Some("232-255".into()),
            year: Some(2020),
            pub_type: PubType::InProceedings,
            access: Access::Open,
            links: vec![],
            doi: None,
            publisher: Some("ACL".into()),
            author_ids: vec![],
            venue_id: None,
            secondary: SecondaryMetadata::default(),
        }
    }

    #[test]
    fn abstract_attached_and_idempotent() {
        let md = FullTextMetadata {
            publication_id: "conf/acl/Mohammad20b".into(),
            ocr_title: Some("NLP Scholar: An Interactive Visual Explorer".into()),
            ocr_abstract: Some("As part of the NLP Scholar project, we ...".into()),
            keywords: vec!["Scientometrics".into(), "Citations".into()],
            ..Default::default()
        };
        let p = publication();
        let once = attach_abstract(&p, &md);
        assert!(once.secondary.ocr_abstract.as_deref().unwrap().starts_with("As part of the NLP Scholar"));
        assert_eq!(once.title, p.title);
        assert_eq!(once.publisher, p.publisher);
        assert_eq!(attach_abstract(&once, &md), once);

        let bare = FullTextMetadata { publication_id: p.id.clone(), ..Default::default() };
        let q = attach_abstract(&p, &bare);
        assert!(q.secondary.ocr_abstract.is_none());
        assert!(q.secondary.keywords.is_none());
    }

    proptest! {
        #[test]
        fn matching_is_injective(
            ext in proptest::collection::vec("[ab ]{0,6}", 0..6),
            cand in proptest::collection::vec("[ab ]{0,6}", 0..6),
            t in 1usize..=10,
        ) {
            let c: Vec<(AuthorId, String)> =
                cand.iter().enumerate().map(|(i, n)| (AuthorId::new(alloc::format!("a{i}")), n.clone())).collect();
            let r = match_author_names(&ext, &c, t as f64 / 10.0);
            prop_assert_eq!(r.len(), ext.len());
            let mut used: Vec<&AuthorId> = r.iter().filter_map(|m| m.author_id.as_ref()).collect();
            let n = used.len();
            used.sort();
            used.dedup();
            prop_assert_eq!(used.len(), n);
            for m in &r {
                prop_assert_eq!(m.author_id.is_some(), meets_threshold(m.score, t as f64 / 10.0));
            }
        }

        #[test]
        fn interning_equality(a in "[ab ]{1,5}", b in "[ab ]{1,5}", ca in proptest::option::of("[xy]{0,2}"), cb in proptest::option::of("[xy]{0,2}")) {
            let fa = AffiliationFields { name: a, country: ca, ..Default::default() };
            let fb = AffiliationFields { name: b, country: cb, ..Default::default() };
            let same = normalize_affiliation(&fa) == normalize_affiliation(&fb);
            prop_assert_eq!(same, affiliation_id(&fa) == affiliation_id(&fb));
        }
    }
}
