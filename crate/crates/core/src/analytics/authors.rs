use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::model::{AuthorId, Publication};

/// Lower bounds of the default author-productivity bins:
/// 1, 2-4, 5-9, 10-19, 20-49, 50+.
pub const DEFAULT_BIN_EDGES: [usize; 6] = [1, 2, 5, 10, 20, 50];

/// Default values for both `min_papers` and `window_years`.
pub const ACTIVITY_GRID: [u32; 5] = [2, 3, 5, 8, 13];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no author published in {from}..={to}")]
    EmptyWindow { from: i32, to: i32 },
    #[error("invalid activity query: min_papers and window_years must be at least 1")]
    InvalidQuery,
    #[error("bin edges must be non-empty, strictly increasing and start at 1 or more")]
    InvalidBins,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorBin {
    pub label: String,
    pub lower: usize,
    /// Inclusive upper bound, `None` for the open last bin.
    pub upper: Option<usize>,
    pub authors: usize,
}

/// Histogram of authors by total number of publications.
pub fn author_paper_bins<I>(pubs: I, edges: &[usize]) -> Result<Vec<AuthorBin>, AnalyticsError>
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    if edges.is_empty() || edges[0] == 0 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalyticsError::InvalidBins);
    }
    let mut per_author: BTreeMap<AuthorId, usize> = BTreeMap::new();
    for p in pubs {
        for a in &p.borrow().author_ids {
            *per_author.entry(a.clone()).or_default() += 1;
        }
    }
    let mut bins: Vec<AuthorBin> = edges
        .iter()
        .enumerate()
        .map(|(i, &lower)| {
            let upper = edges.get(i + 1).map(|next| next - 1);
            let label = match upper {
                Some(u) if u == lower => format!("{lower}"),
                Some(u) => format!("{lower}-{u}"),
                None => format!("{lower}+"),
            };
            AuthorBin { label, lower, upper, authors: 0 }
        })
        .collect();
    for &count in per_author.values() {
        if let Some(i) = edges.iter().rposition(|&e| e <= count) {
            bins[i].authors += 1;
        }
    }
    Ok(bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityQuery {
    pub min_papers: u32,
    pub window_years: u32,
    pub reference_year: i32,
}

impl ActivityQuery {
    pub fn window(&self) -> (i32, i32) {
        (self.reference_year - self.window_years as i32 + 1, self.reference_year)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// Authors with at least one paper inside the window.
    #[default]
    WindowLocal,
    /// Authors with at least one dated paper up to the reference year.
    AllTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityResult {
    pub min_papers: u32,
    pub window_years: u32,
    pub fraction: f64,
    pub numerator: usize,
    pub denominator: usize,
}

/// Sorted publication years per author, built once and queried many times.
#[derive(Debug, Clone, Default)]
pub struct ActivityIndex {
    years: Vec<Vec<i32>>,
}

impl ActivityIndex {
    pub fn build<I>(pubs: I) -> Self
    where
        I: IntoIterator,
        I::Item: Borrow<Publication>,
    {
        let mut per_author: BTreeMap<AuthorId, Vec<i32>> = BTreeMap::new();
        for p in pubs {
            let p = p.borrow();
            let Some(y) = p.year else { continue };
            for a in &p.author_ids {
                per_author.entry(a.clone()).or_default().push(y);
            }
        }
        let years = per_author
            .into_values()
            .map(|mut v| {
                v.sort_unstable();
                v
            })
            .collect();
        Self { years }
    }

    pub fn query(&self, q: &ActivityQuery, mode: DenominatorMode) -> Result<ActivityResult, AnalyticsError> {
        if q.min_papers == 0 || q.window_years == 0 {
            return Err(AnalyticsError::InvalidQuery);
        }
        let (from, to) = q.window();
        let mut numerator = 0usize;
        let mut denominator = 0usize;
        for ys in &self.years {
            let lo = ys.partition_point(|&y| y < from);
            let hi = ys.partition_point(|&y| y <= to);
            let in_window = hi - lo;
            let counted = match mode {
                DenominatorMode::WindowLocal => in_window > 0,
                DenominatorMode::AllTime => hi > 0,
            };
            if counted {
                denominator += 1;
            }
            if in_window >= q.min_papers as usize {
                numerator += 1;
            }
        }
        if denominator == 0 {
            return Err(AnalyticsError::EmptyWindow { from, to });
        }
        Ok(ActivityResult {
            min_papers: q.min_papers,
            window_years: q.window_years,
            fraction: numerator as f64 / denominator as f64,
            numerator,
            denominator,
        })
    }
}

pub fn active_researchers<I>(pubs: I, q: &ActivityQuery, mode: DenominatorMode) -> Result<ActivityResult, AnalyticsError>
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    ActivityIndex::build(pubs).query(q, mode)
}

/// Results for every `(x, y)` pair of the grids, row-major by `min_papers`.
pub fn active_matrix(
    index: &ActivityIndex,
    min_papers: &[u32],
    window_years: &[u32],
    reference_year: i32,
    mode: DenominatorMode,
) -> Result<Vec<ActivityResult>, AnalyticsError> {
    let mut out = Vec::with_capacity(min_papers.len() * window_years.len());
    for &x in min_papers {
        for &y in window_years {
            out.push(index.query(&ActivityQuery { min_papers: x, window_years: y, reference_year }, mode)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::Date;
    use crate::model::{Access, PubType, PublicationId, SecondaryMetadata};
    use alloc::vec;

    fn publ(id: &str, year: i32, authors: &[&str]) -> Publication {
        Publication {
            id: PublicationId::from(id),
            modified_date: Date::new(2021, 1, 1).unwrap(),
            title: String::from(id),
            pages: None,
            year: Some(year),
            pub_type: PubType::Article,
            access: Access::Unknown,
            links: vec![],
            doi: None,
            publisher: None,
            author_ids: authors.iter().map(|a| AuthorId::from(*a)).collect(),
            venue_id: None,
            secondary: SecondaryMetadata::default(),
        }
    }

    #[test]
    fn bins_default_edges() {
        let mut pubs = vec![publ("p0", 2000, &["a", "b"])];
        for i in 0..4 {
            pubs.push(publ(&format!("q{i}"), 2001, &["b"]));
        }
        let bins = author_paper_bins(&pubs, &DEFAULT_BIN_EDGES).unwrap();
        let labels: Vec<&str> = bins.iter().map(|b| b.label.as_str()).collect();
        assert_eq!(labels, ["1", "2-4", "5-9", "10-19", "20-49", "50+"]);
        assert_eq!(bins[0].authors, 1);
        assert_eq!(bins[2].authors, 1);
        assert!(author_paper_bins(&pubs, &[2, 2]).is_err());
    }

    #[test]
    fn yearly_authors_are_always_active() {
        let pubs: Vec<Publication> = (2000..2021).map(|y| publ(&format!("p{y}"), y, &["a", "b"])).collect();
        let idx = ActivityIndex::build(&pubs);
        for &x in &ACTIVITY_GRID {
            for &y in &ACTIVITY_GRID {
                let r = idx.query(&ActivityQuery { min_papers: x, window_years: y, reference_year: 2020 }, DenominatorMode::WindowLocal).unwrap();
                assert_eq!(r.fraction, if x <= y { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn denominator_modes() {
        let pubs = vec![publ("p1", 1990, &["old"]), publ("p2", 2020, &["new"]), publ("p3", 2021, &["new"])];
        let q = ActivityQuery { min_papers: 2, window_years: 2, reference_year: 2021 };
        let local = active_researchers(&pubs, &q, DenominatorMode::WindowLocal).unwrap();
        assert_eq!((local.numerator, local.denominator), (1, 1));
        let all = active_researchers(&pubs, &q, DenominatorMode::AllTime).unwrap();
        assert_eq!((all.numerator, all.denominator), (1, 2));
        let q = ActivityQuery { min_papers: 1, window_years: 2, reference_year: 2010 };
        assert_eq!(
            active_researchers(&pubs, &q, DenominatorMode::WindowLocal),
            Err(AnalyticsError::EmptyWindow { from: 2009, to: 2010 })
        );
    }
}
