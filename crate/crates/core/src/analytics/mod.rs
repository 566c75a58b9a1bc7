//! Corpus analyses. Every function is a pure function of the publications
//! (and citation graph) it is given; iteration order of the inputs does not
//! affect the results.

mod authors;
mod citations;
mod counts;
mod fit;
mod series;
mod terms;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{Publication, VenueId};

pub use authors::{
    active_matrix, active_researchers, author_paper_bins, ActivityIndex, ActivityQuery, ActivityResult, AnalyticsError,
    AuthorBin, DenominatorMode, ACTIVITY_GRID, DEFAULT_BIN_EDGES,
};
pub use citations::{citation_trend, CitationTrend};
pub use counts::{counts_by, counts_by_type, TypeCount};
pub use fit::{cubic_fit, cubic_fit_series, CubicFit, FitError};
pub use series::{avg_authors_per_paper, avg_growth_rate, yearly_series, GrowthAveraging, SeriesEntity};
pub use terms::{
    term_frequencies, term_shift, EnglishSingularizer, IdentityNormalizer, StopwordSet, TermNormalizer, TermShift,
    TermTable, TextField, STOPWORDS_EN_V1, STOPWORDS_VERSION,
};

/// `(year, value)` points with strictly increasing years.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct YearSeries {
    pub points: Vec<(i32, f64)>,
}

impl YearSeries {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn value_at(&self, year: i32) -> Option<f64> {
        self.points
            .binary_search_by_key(&year, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    /// The series without its last point (used to leave a partial final year
    /// out of trend fits).
    pub fn without_last(&self) -> YearSeries {
        let mut points = self.points.clone();
        points.pop();
        YearSeries { points }
    }
}

/// Restricts an analysis to one venue and/or a year range (inclusive).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationFilter {
    pub venue: Option<VenueId>,
    pub year_from: Option<i32>,
    pub year_to: Option<i32>,
}

impl PublicationFilter {
    pub fn year(year: i32) -> Self {
        Self { venue: None, year_from: Some(year), year_to: Some(year) }
    }

    pub fn with_venue(mut self, venue: Option<VenueId>) -> Self {
        self.venue = venue;
        self
    }

    pub fn accepts(&self, p: &Publication) -> bool {
        if let Some(v) = &self.venue {
            if p.venue_id.as_ref() != Some(v) {
                return false;
            }
        }
        if self.year_from.is_some() || self.year_to.is_some() {
            let Some(y) = p.year else { return false };
            if self.year_from.is_some_and(|from| y < from) || self.year_to.is_some_and(|to| y > to) {
                return false;
            }
        }
        true
    }
}
