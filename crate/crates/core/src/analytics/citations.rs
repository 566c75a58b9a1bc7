use alloc::collections::BTreeMap;
use core::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::{cubic_fit_series, CubicFit, YearSeries};
use crate::citegraph::CitationGraph;
use crate::model::Publication;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationTrend {
    pub incoming: YearSeries,
    pub outgoing: YearSeries,
    pub incoming_fit: Option<CubicFit>,
    pub outgoing_fit: Option<CubicFit>,
}

/// Mean in-corpus incoming and outgoing citations of the papers published
/// each year. Fits are omitted when the (possibly trimmed) series has fewer
/// than four points.
pub fn citation_trend<I>(pubs: I, graph: &CitationGraph, exclude_final_year: bool) -> CitationTrend
where
    I: IntoIterator,
    I::Item: Borrow<Publication>,
{
    let mut acc: BTreeMap<i32, (usize, usize, usize)> = BTreeMap::new();
    for p in pubs {
        let p = p.borrow();
        let Some(y) = p.year else { continue };
        let e = acc.entry(y).or_default();
        e.0 += graph.in_degree(&p.id);
        e.1 += graph.out_degree(&p.id);
        e.2 += 1;
    }
    let incoming = YearSeries { points: acc.iter().map(|(y, e)| (*y, e.0 as f64 / e.2 as f64)).collect() };
    let outgoing = YearSeries { points: acc.iter().map(|(y, e)| (*y, e.1 as f64 / e.2 as f64)).collect() };
    let fit = |s: &YearSeries| {
        let s = if exclude_final_year { s.without_last() } else { s.clone() };
        cubic_fit_series(&s).ok()
    };
    CitationTrend { incoming_fit: fit(&incoming), outgoing_fit: fit(&outgoing), incoming, outgoing }
}
