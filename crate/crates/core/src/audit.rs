//! Sampling audit of author-name matching against gold labels.
//!
//! Two sampling modes: `uniform` draws `sample_count` samples of
//! `sample_size` publications with a seeded generator; `adversarial` takes
//! the `sample_size` publications whose names match worst (lowest mean best
//! similarity). The mismatch rate is pooled over every sampled name. The
//! p-value comes from a one-sided permutation test whose statistic is the
//! mismatch count; the null shuffles gold labels across the pooled names,
//! which corresponds to assigning authors at random.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::match_author_names;
use crate::model::{AuthorId, PublicationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    Uniform,
    Adversarial,
}

impl AuditMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditMode::Uniform => "uniform",
            AuditMode::Adversarial => "adversarial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub sample_count: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub mode: AuditMode,
    pub permutations: usize,
    pub threshold: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            sample_count: 20,
            sample_size: 100,
            seed: 0,
            mode: AuditMode::Uniform,
            permutations: 10_000,
            threshold: crate::text::DEFAULT_THRESHOLD,
        }
    }
}

/// One publication as seen by the audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditItem {
    pub publication_id: PublicationId,
    /// Author names as printed in the full text.
    pub extracted: Vec<String>,
    /// DBLP authors of the publication in order.
    pub candidates: Vec<(AuthorId, String)>,
    /// True author for each extracted name, when known.
    pub gold: Option<Vec<AuthorId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error("corpus has {have} publications with metadata, audit needs {need}")]
    InsufficientCorpus { have: usize, need: usize },
    #[error("sample_count, sample_size and permutations must be positive")]
    InvalidConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mode: AuditMode,
    /// Pooled mismatch rate; absent when some sampled publication has no gold labels.
    pub rate: Option<f64>,
    pub p_value: Option<f64>,
    pub names: usize,
    pub mismatches: Option<usize>,
    pub samples: usize,
    pub scores: Option<ScoreSummary>,
}

struct Predicted {
    predictions: Vec<Option<AuthorId>>,
    scores: Vec<f64>,
    mean_score: f64,
}

fn predict(item: &AuditItem, threshold: f64) -> Predicted {
    let matches = match_author_names(&item.extracted, &item.candidates, threshold);
    let scores: Vec<f64> = matches.iter().map(|m| m.score).collect();
    let mean_score = if scores.is_empty() { 1.0 } else { scores.iter().sum::<f64>() / scores.len() as f64 };
    Predicted { predictions: matches.into_iter().map(|m| m.author_id).collect(), scores, mean_score }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(mut scores: Vec<f64>) -> Option<ScoreSummary> {
    if scores.is_empty() {
        return None;
    }
    scores.sort_by(f64::total_cmp);
    Some(ScoreSummary {
        min: scores[0],
        q25: quantile(&scores, 0.25),
        median: quantile(&scores, 0.5),
        q75: quantile(&scores, 0.75),
        max: scores[scores.len() - 1],
    })
}

/// One-sided permutation p-value for "observed mismatch count is lower than
/// under random assignment". `predicted[i]` is compared with a shuffled gold
/// label; labels and predictions are interned to integers for speed.
pub fn permutation_p_value(predicted: &[Option<u32>], gold: &[u32], permutations: usize, seed: u64) -> f64 {
    let observed = predicted.iter().zip(gold).filter(|(p, g)| **p != Some(**g)).count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = gold.to_vec();
    let mut at_most = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        let count = predicted.iter().zip(&shuffled).filter(|(p, g)| **p != Some(**g)).count();
        if count <= observed {
            at_most += 1;
        }
    }
    (1 + at_most) as f64 / (1 + permutations) as f64
}

pub fn mismatch_audit(corpus: &[AuditItem], config: &AuditConfig) -> Result<AuditReport, AuditError> {
    if config.sample_count == 0 || config.sample_size == 0 || config.permutations == 0 {
        return Err(AuditError::InvalidConfig);
    }
    if corpus.len() < config.sample_size {
        return Err(AuditError::InsufficientCorpus { have: corpus.len(), need: config.sample_size });
    }
    let predicted: Vec<Predicted> = corpus.iter().map(|item| predict(item, config.threshold)).collect();

    let samples: Vec<Vec<usize>> = match config.mode {
        AuditMode::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..config.sample_count)
                .map(|_| rand::seq::index::sample(&mut rng, corpus.len(), config.sample_size).into_vec())
                .collect()
        }
        AuditMode::Adversarial => {
            let mut order: Vec<usize> = (0..corpus.len()).collect();
            order.sort_by(|&a, &b| {
                predicted[a]
                    .mean_score
                    .total_cmp(&predicted[b].mean_score)
                    .then_with(|| corpus[a].publication_id.cmp(&corpus[b].publication_id))
            });
            order.truncate(config.sample_size);
            alloc::vec![order]
        }
    };

    let mut ids: BTreeMap<&AuthorId, u32> = BTreeMap::new();
    let mut pooled_pred: Vec<Option<u32>> = Vec::new();
    let mut pooled_gold: Vec<u32> = Vec::new();
    let mut scores: Vec<f64> = Vec::new();
    let mut labelled = true;
    for sample in &samples {
        for &i in sample {
            let p = &predicted[i];
            scores.extend_from_slice(&p.scores);
            match &corpus[i].gold {
                Some(gold) if gold.len() == p.predictions.len() => {
                    for (pred, g) in p.predictions.iter().zip(gold) {
                        pooled_pred.push(pred.as_ref().map(|a| intern(a, &mut ids)));
                        pooled_gold.push(intern(g, &mut ids));
                    }
                }
                _ => labelled = false,
            }
        }
    }
    let names = scores.len();
    let scores = summarize(scores);
    if !labelled {
        return Ok(AuditReport {
            mode: config.mode,
            rate: None,
            p_value: None,
            names,
            mismatches: None,
            samples: samples.len(),
            scores,
        });
    }
    let mismatches = pooled_pred.iter().zip(&pooled_gold).filter(|(p, g)| **p != Some(**g)).count();
    let rate = if names == 0 { 0.0 } else { mismatches as f64 / names as f64 };
    let p_value = permutation_p_value(&pooled_pred, &pooled_gold, config.permutations, config.seed ^ PERMUTATION_STREAM);
    Ok(AuditReport {
        mode: config.mode,
        rate: Some(rate),
        p_value: Some(p_value),
        names,
        mismatches: Some(mismatches),
        samples: samples.len(),
        scores,
    })
}

const PERMUTATION_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

fn intern<'a>(id: &'a AuthorId, ids: &mut BTreeMap<&'a AuthorId, u32>) -> u32 {
    let next = ids.len() as u32;
    *ids.entry(id).or_insert(next)
}
