//! Tabular report data for the eight corpus questions.
//!
//! | report | content | CSV columns |
//! |---|---|---|
//! | q1 | publications by type | `Paper Type,Count,Proportion` |
//! | q2 | yearly publications and authors, authors per paper with cubic fit | `year,publications,authors,avg_authors_per_paper,fit` |
//! | q3 | authors by number of papers | `papers,authors,share` |
//! | q4 | active-researcher grid | `min_papers,window_years,numerator,denominator,fraction` |
//! | q5 | most frequent title and abstract terms | `field,rank,term,count` |
//! | q6 | abstract term shift between two years | `term,count_a,count_b` |
//! | q7 | citation degree statistics | `metric,incoming,outgoing` |
//! | q8 | mean citations per publication year with cubic fits | `year,papers,mean_incoming,mean_outgoing,fit_incoming,fit_outgoing` |
//!
//! JSON output carries the same data plus summary figures. Every report is
//! a pure function of the store contents.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use d3_core::analytics::{
    author_paper_bins, avg_authors_per_paper, avg_growth_rate, citation_trend, counts_by_type,
    cubic_fit_series, term_frequencies, term_shift, yearly_series, ActivityIndex, ActivityQuery, AnalyticsError,
    CubicFit, DenominatorMode, EnglishSingularizer, GrowthAveraging, IdentityNormalizer, PublicationFilter,
    SeriesEntity, StopwordSet, TermNormalizer, TextField, YearSeries, ACTIVITY_GRID, DEFAULT_BIN_EDGES,
};
use d3_core::citegraph::{citation_stats, CitationGraph, CitationStats};
use d3_core::model::{PubType, Publication, VenueId};
use serde_json::{json, Value};

use crate::stages::load_citation_graph;
use crate::store::{Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("unknown report {0:?} (expected q1 to q8)")]
    UnknownReport(String),
    #[error("{0}")]
    MissingData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportId {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
    Q8,
}

impl ReportId {
    pub const ALL: [ReportId; 8] =
        [ReportId::Q1, ReportId::Q2, ReportId::Q3, ReportId::Q4, ReportId::Q5, ReportId::Q6, ReportId::Q7, ReportId::Q8];
}

impl fmt::Display for ReportId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", *self as u8 + 1)
    }
}

impl FromStr for ReportId {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportId::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| ReportError::UnknownReport(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalizer {
    #[default]
    Singular,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub venue: Option<String>,
    pub year_a: Option<i32>,
    pub year_b: Option<i32>,
    /// Defaults to the latest publication year in the store.
    pub ref_year: Option<i32>,
    pub top_k: usize,
    pub min_count: u64,
    pub denominator: DenominatorMode,
    pub averaging: GrowthAveraging,
    /// Keep the final (possibly partial) year in cubic fits.
    pub include_final_year: bool,
    pub normalizer: Normalizer,
    pub bin_edges: Vec<usize>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            venue: None,
            year_a: None,
            year_b: None,
            ref_year: None,
            top_k: 30,
            min_count: 1,
            denominator: DenominatorMode::WindowLocal,
            averaging: GrowthAveraging::Geometric,
            include_final_year: false,
            normalizer: Normalizer::Singular,
            bin_edges: DEFAULT_BIN_EDGES.to_vec(),
        }
    }
}

/// A report as a table plus its JSON document.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
}

impl Rendered {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json).expect("JSON values serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn percent(share: f64) -> String {
    format!("{:.2}%", share * 100.0)
}

/// Everything a report may need, loaded once.
pub struct ReportData {
    pub publications: Vec<Publication>,
    pub graph: CitationGraph,
}

impl ReportData {
    pub fn load(store: &Store) -> Result<Self, StoreError> {
        Ok(Self { publications: store.read_all()?, graph: load_citation_graph(store)? })
    }

    fn latest_year(&self) -> Option<i32> {
        self.publications.iter().filter_map(|p| p.year).max()
    }
}

pub fn run_report(id: ReportId, data: &ReportData, opts: &ReportOptions) -> Result<Rendered, ReportError> {
    match id {
        ReportId::Q1 => Ok(q1_types(&data.publications, opts)),
        ReportId::Q2 => Ok(q2_authors_over_time(&data.publications, opts)),
        ReportId::Q3 => q3_author_bins(&data.publications, opts),
        ReportId::Q4 => q4_active(data, opts),
        ReportId::Q5 => Ok(q5_terms(&data.publications, opts)),
        ReportId::Q6 => q6_term_shift(data, opts),
        ReportId::Q7 => Ok(q7_citation_stats(&citation_stats(&data.graph, data.publications.len()))),
        ReportId::Q8 => Ok(q8_citation_trend(data, opts)),
    }
}

fn filter_for(opts: &ReportOptions) -> PublicationFilter {
    PublicationFilter::default().with_venue(opts.venue.clone().map(VenueId::new))
}

fn series_json(s: &YearSeries) -> Value {
    Value::Array(s.points.iter().map(|(y, v)| json!([y, v])).collect())
}

fn fit_for(series: &YearSeries, opts: &ReportOptions) -> Option<CubicFit> {
    let s = if opts.include_final_year { series.clone() } else { series.without_last() };
    cubic_fit_series(&s).ok()
}

fn q1_types(pubs: &[Publication], opts: &ReportOptions) -> Rendered {
    let counts = counts_by_type(pubs);
    let total = pubs.len();
    let mut rows = Vec::new();
    let mut types = Vec::new();
    for t in PubType::ALL {
        let (count, share) = counts.get(&t).map(|c| (c.count, c.share)).unwrap_or((0, 0.0));
        rows.push(vec![t.table_label().to_string(), count.to_string(), percent(share)]);
        types.push(json!({"type": t.as_str(), "label": t.table_label(), "count": count, "share": share}));
    }
    rows.push(vec!["total".into(), total.to_string(), "100%".into()]);
    let series = yearly_series(pubs, SeriesEntity::Publications, &filter_for(opts));
    Rendered {
        header: header(&["Paper Type", "Count", "Proportion"]),
        rows,
        json: json!({
            "report": "q1",
            "types": types,
            "total": total,
            "publications_per_year": series_json(&series),
            "avg_growth_rate": avg_growth_rate(&series, opts.averaging),
        }),
    }
}

fn q2_authors_over_time(pubs: &[Publication], opts: &ReportOptions) -> Rendered {
    let filter = filter_for(opts);
    let papers = yearly_series(pubs, SeriesEntity::Publications, &filter);
    let authors = yearly_series(pubs, SeriesEntity::Authors, &filter);
    let avg = avg_authors_per_paper(pubs, &filter);
    let fit = fit_for(&avg, opts);
    let rows = papers
        .points
        .iter()
        .map(|&(y, n)| {
            vec![
                y.to_string(),
                num(n),
                opt_num(authors.value_at(y)),
                opt_num(avg.value_at(y)),
                opt_num(fit.as_ref().filter(|_| avg.value_at(y).is_some()).map(|f| f.eval(f64::from(y)))),
            ]
        })
        .collect();
    Rendered {
        header: header(&["year", "publications", "authors", "avg_authors_per_paper", "fit"]),
        rows,
        json: json!({
            "report": "q2",
            "publications": series_json(&papers),
            "authors": series_json(&authors),
            "avg_authors_per_paper": series_json(&avg),
            "author_growth_rate": avg_growth_rate(&authors, opts.averaging),
            "fit": fit,
        }),
    }
}

fn q3_author_bins(pubs: &[Publication], opts: &ReportOptions) -> Result<Rendered, ReportError> {
    let bins = author_paper_bins(pubs, &opts.bin_edges)?;
    let total: usize = bins.iter().map(|b| b.authors).sum();
    let share = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    let rows = bins.iter().map(|b| vec![b.label.clone(), b.authors.to_string(), num(share(b.authors))]).collect();
    let bins_json: Vec<Value> = bins
        .iter()
        .map(|b| json!({"papers": b.label, "lower": b.lower, "upper": b.upper, "authors": b.authors, "share": share(b.authors)}))
        .collect();
    Ok(Rendered {
        header: header(&["papers", "authors", "share"]),
        rows,
        json: json!({"report": "q3", "authors": total, "bins": bins_json}),
    })
}

fn q4_active(data: &ReportData, opts: &ReportOptions) -> Result<Rendered, ReportError> {
    let reference_year = opts
        .ref_year
        .or_else(|| data.latest_year())
        .ok_or_else(|| ReportError::MissingData("no dated publications".into()))?;
    let index = ActivityIndex::build(&data.publications);
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &x in &ACTIVITY_GRID {
        for &y in &ACTIVITY_GRID {
            let q = ActivityQuery { min_papers: x, window_years: y, reference_year };
            match index.query(&q, opts.denominator) {
                Ok(r) => {
                    rows.push(vec![
                        x.to_string(),
                        y.to_string(),
                        r.numerator.to_string(),
                        r.denominator.to_string(),
                        num(r.fraction),
                    ]);
                    cells.push(serde_json::to_value(r).expect("plain struct"));
                }
                Err(AnalyticsError::EmptyWindow { .. }) => {
                    rows.push(vec![x.to_string(), y.to_string(), "0".into(), "0".into(), String::new()]);
                    cells.push(json!({"min_papers": x, "window_years": y, "fraction": null, "numerator": 0, "denominator": 0}));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(Rendered {
        header: header(&["min_papers", "window_years", "numerator", "denominator", "fraction"]),
        rows,
        json: json!({
            "report": "q4",
            "reference_year": reference_year,
            "denominator": opts.denominator,
            "cells": cells,
        }),
    })
}

fn normalizer_for(n: Normalizer) -> &'static dyn TermNormalizer {
    match n {
        Normalizer::Singular => &EnglishSingularizer,
        Normalizer::Identity => &IdentityNormalizer,
    }
}

fn q5_terms(pubs: &[Publication], opts: &ReportOptions) -> Rendered {
    let stopwords = StopwordSet::english();
    let filter = filter_for(opts);
    let normalizer = normalizer_for(opts.normalizer);
    let mut rows = Vec::new();
    let mut tables = serde_json::Map::new();
    for field in [TextField::Title, TextField::Abstract] {
        let table = term_frequencies(pubs, field, &filter, Some(opts.top_k), &stopwords, normalizer);
        for (rank, (term, count)) in table.entries.iter().enumerate() {
            rows.push(vec![field.as_str().to_string(), (rank + 1).to_string(), term.clone(), count.to_string()]);
        }
        tables.insert(
            field.as_str().to_string(),
            json!({
                "terms": table.entries,
                "total_tokens": table.total_tokens,
                "stopword_tokens": table.stopword_tokens,
                "dropped_tokens": table.dropped_tokens,
                "counted_tokens": table.counted_tokens,
                "distinct_terms": table.distinct_terms,
            }),
        );
    }
    Rendered {
        header: header(&["field", "rank", "term", "count"]),
        rows,
        json: json!({"report": "q5", "stopwords": stopwords.version(), "fields": tables}),
    }
}

fn q6_term_shift(data: &ReportData, opts: &ReportOptions) -> Result<Rendered, ReportError> {
    let year_b = opts
        .year_b
        .or_else(|| data.latest_year())
        .ok_or_else(|| ReportError::MissingData("no dated publications".into()))?;
    let year_a = opts.year_a.unwrap_or(year_b - 4);
    let stopwords = StopwordSet::english();
    let shift = term_shift(
        &data.publications,
        opts.venue.clone().map(VenueId::new),
        TextField::Abstract,
        year_a,
        year_b,
        opts.min_count,
        &stopwords,
        normalizer_for(opts.normalizer),
    );
    let rows = shift.iter().map(|s| vec![s.term.clone(), s.count_a.to_string(), s.count_b.to_string()]).collect();
    Ok(Rendered {
        header: header(&["term", "count_a", "count_b"]),
        rows,
        json: json!({
            "report": "q6",
            "venue": opts.venue,
            "year_a": year_a,
            "year_b": year_b,
            "min_count": opts.min_count,
            "terms": shift,
        }),
    })
}

pub fn q7_citation_stats(stats: &CitationStats) -> Rendered {
    let mut rows = vec![
        vec!["mean".into(), num(stats.mean_in), num(stats.mean_out)],
        vec!["median".into(), num(stats.median_in), num(stats.median_out)],
    ];
    for ((label, i), (_, o)) in stats.histogram_in.iter().zip(&stats.histogram_out) {
        rows.push(vec![format!("degree {label}"), i.to_string(), o.to_string()]);
    }
    let mut doc = serde_json::to_value(stats).expect("plain struct");
    doc.as_object_mut().expect("struct").insert("report".into(), json!("q7"));
    Rendered { header: header(&["metric", "incoming", "outgoing"]), rows, json: doc }
}

fn q8_citation_trend(data: &ReportData, opts: &ReportOptions) -> Rendered {
    let trend = citation_trend(&data.publications, &data.graph, !opts.include_final_year);
    let mut papers: BTreeMap<i32, usize> = BTreeMap::new();
    for y in data.publications.iter().filter_map(|p| p.year) {
        *papers.entry(y).or_default() += 1;
    }
    let eval = |fit: &Option<CubicFit>, y: i32| fit.as_ref().map(|f| f.eval(f64::from(y)));
    let rows = trend
        .incoming
        .points
        .iter()
        .map(|&(y, inc)| {
            vec![
                y.to_string(),
                papers.get(&y).copied().unwrap_or(0).to_string(),
                num(inc),
                opt_num(trend.outgoing.value_at(y)),
                opt_num(eval(&trend.incoming_fit, y)),
                opt_num(eval(&trend.outgoing_fit, y)),
            ]
        })
        .collect();
    Rendered {
        header: header(&["year", "papers", "mean_incoming", "mean_outgoing", "fit_incoming", "fit_outgoing"]),
        rows,
        json: json!({
            "report": "q8",
            "incoming": series_json(&trend.incoming),
            "outgoing": series_json(&trend.outgoing),
            "incoming_fit": trend.incoming_fit,
            "outgoing_fit": trend.outgoing_fit,
            "final_year_in_fit": opts.include_final_year,
        }),
    }
}
