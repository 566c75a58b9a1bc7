//! TOML configuration mirroring the command-line flags. Flags win.
//!
//! ```toml
//! store = "data/store"
//! log_level = "info"
//! seed = 7
//! workers = 8
//!
//! [ingest]
//! dump = "dblp.xml.gz"
//! dtd = "dblp.dtd"
//! chunk_size = 100000
//!
//! [harvest]
//! chunk_size = 1000
//! per_domain_limit = 2
//! extractor = "external"
//! extractor_endpoint = "http://localhost:8070"
//!
//! [align]
//! threshold = 0.8
//!
//! [audit]
//! mode = "adversarial"
//! samples = 20
//! n = 100
//!
//! [citegraph]
//! threshold = 0.8
//! lookup = "http:https://api.semanticscholar.org/graph/v1/paper"
//!
//! [report]
//! format = "json"
//! venue = "acl"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    /// Pre-computed metadata from a sidecar JSONL file.
    Fixture,
    /// A GROBID-compatible extraction service.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AuditModeArg {
    Uniform,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DenominatorArg {
    WindowLocal,
    AllTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AveragingArg {
    Geometric,
    Arithmetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerArg {
    Singular,
    Identity,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub store: Option<PathBuf>,
    pub log_level: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub harvest: HarvestSection,
    #[serde(default)]
    pub align: AlignSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub citegraph: CitegraphSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub compact: CompactSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub dump: Option<PathBuf>,
    pub dtd: Option<PathBuf>,
    pub chunk_size: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestSection {
    pub chunk_size: Option<usize>,
    pub per_domain_limit: Option<usize>,
    pub extractor: Option<ExtractorKind>,
    pub extractor_endpoint: Option<String>,
    pub sidecar: Option<PathBuf>,
    pub simulate: Option<PathBuf>,
    pub work_dir: Option<PathBuf>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignSection {
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub mode: Option<AuditModeArg>,
    pub samples: Option<usize>,
    pub n: Option<usize>,
    pub permutations: Option<usize>,
    pub threshold: Option<f64>,
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitegraphSection {
    pub threshold: Option<f64>,
    pub lookup: Option<String>,
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    pub format: Option<FormatArg>,
    pub venue: Option<String>,
    pub year_a: Option<i32>,
    pub year_b: Option<i32>,
    pub ref_year: Option<i32>,
    pub top_k: Option<usize>,
    pub min_count: Option<u64>,
    pub denominator: Option<DenominatorArg>,
    pub averaging: Option<AveragingArg>,
    pub include_final_year: Option<bool>,
    pub normalizer: Option<NormalizerArg>,
    pub bin_edges: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactSection {
    pub chunk_size: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}
