use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::{PublicationFilter, YearSeries};
use crate::model::{AuthorId, Publication};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesEntity {
    Publications,
    /// Distinct authors with at least one publication in the year.
    Authors,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthAveraging {
    #[default]
    Geometric,
    Arithmetic,
}

/// Per-year counts. Years without any publication are omitted; records
/// without a year are ignored.
pub fn yearly_series<I>(pubs: I, entity: SeriesEntity, filter: &PublicationFilter) -> YearSeries
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    let mut pubs_per_year: BTreeMap<i32, usize> = BTreeMap::new();
    let mut authors_per_year: BTreeMap<i32, BTreeSet<AuthorId>> = BTreeMap::new();
    for p in pubs {
        let p = p.borrow();
        if !filter.accepts(p) {
            continue;
        }
        let Some(year) = p.year else { continue };
        match entity {
            SeriesEntity::Publications => *pubs_per_year.entry(year).or_default() += 1,
            SeriesEntity::Authors => {
                authors_per_year.entry(year).or_default().extend(p.author_ids.iter().cloned());
            }
        }
    }
    let points = match entity {
        SeriesEntity::Publications => pubs_per_year.into_iter().map(|(y, c)| (y, c as f64)).collect(),
        SeriesEntity::Authors => authors_per_year.into_iter().map(|(y, s)| (y, s.len() as f64)).collect(),
    };
    YearSeries { points }
}

/// Mean year-over-year growth over consecutive years with positive values.
/// Returns `None` when there is no such pair.
pub fn avg_growth_rate(series: &YearSeries, averaging: GrowthAveraging) -> Option<f64> {
    let ratios: Vec<f64> = series
        .points
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1 && w[0].1 > 0.0 && w[1].1 > 0.0)
        .map(|w| w[1].1 / w[0].1)
        .collect();
    if ratios.is_empty() {
        return None;
    }
    let n = ratios.len() as f64;
    Some(match averaging {
        GrowthAveraging::Geometric => libm::exp(ratios.iter().map(|r| libm::log(*r)).sum::<f64>() / n) - 1.0,
        GrowthAveraging::Arithmetic => ratios.iter().map(|r| r - 1.0).sum::<f64>() / n,
    })
}

/// Mean number of authors per publication, by year. Publications without
/// authors are left out of both numerator and denominator.
pub fn avg_authors_per_paper<I>(pubs: I, filter: &PublicationFilter) -> YearSeries
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    let mut acc: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for p in pubs {
        let p = p.borrow();
        if !filter.accepts(p) || p.author_ids.is_empty() {
            continue;
        }
        let Some(year) = p.year else { continue };
        let e = acc.entry(year).or_default();
        e.0 += p.author_ids.len();
        e.1 += 1;
    }
    YearSeries { points: acc.into_iter().map(|(y, (a, n))| (y, a as f64 / n as f64)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn geometric_growth_of_constant_ratio() {
        let s = YearSeries { points: vec![(2000, 100.0), (2001, 110.0), (2002, 121.0), (2003, 133.1)] };
        let g = avg_growth_rate(&s, GrowthAveraging::Geometric).unwrap();
        assert!((g - 0.1).abs() < 1e-12);
        let a = avg_growth_rate(&s, GrowthAveraging::Arithmetic).unwrap();
        assert!((a - 0.1).abs() < 1e-12);
    }

    #[test]
    fn growth_skips_gaps_and_zeros() {
        let s = YearSeries { points: vec![(2000, 10.0), (2002, 20.0), (2003, 40.0)] };
        assert_eq!(avg_growth_rate(&s, GrowthAveraging::Geometric), Some(1.0));
        let s = YearSeries { points: vec![(2000, 0.0), (2001, 5.0)] };
        assert_eq!(avg_growth_rate(&s, GrowthAveraging::Geometric), None);
    }

    #[test]
    fn geometric_differs_from_arithmetic() {
        let s = YearSeries { points: vec![(2000, 100.0), (2001, 200.0), (2002, 100.0)] };
        assert!(avg_growth_rate(&s, GrowthAveraging::Geometric).unwrap().abs() < 1e-12);
        assert!((avg_growth_rate(&s, GrowthAveraging::Arithmetic).unwrap() - 0.25).abs() < 1e-12);
    }
}
