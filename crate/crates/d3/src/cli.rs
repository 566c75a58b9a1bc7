use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use d3::harvest::extract::{Extractor, GrobidExtractor, SidecarExtractor};
use d3::harvest::fetch::RetryPolicy;
use d3::harvest::limiter::DomainLimiter;
use d3::harvest::sim::{Schedule, SimulatedServer};
use d3::harvest::transport::{HttpTransport, Transport};
use d3::harvest::Harvester;
use d3::ingest::{apply_changeset, build_corpus, current_year, diff_against_store, write_corpus, Corpus};
use d3::reports::{run_report, Format, Normalizer, ReportData, ReportId, ReportOptions};
use d3::stages::{
    align_store, audit_items, build_citation_graph, load_citation_graph, load_gold, write_citation_graph,
    FixtureLookup, HttpLookup,
};
use d3::store::{Batch, FulltextRecord, Kind, Store, DEFAULT_CHUNK_SIZE};
use d3::xml::{open_dump, DumpReader, EntityTable};
use d3_core::analytics::{DenominatorMode, GrowthAveraging, DEFAULT_BIN_EDGES};
use d3_core::audit::{mismatch_audit, AuditConfig, AuditMode};
use d3_core::chunk::plan_chunks;
use d3_core::citegraph::{citation_stats, external_citation_share, CitationLookup};
use d3_core::model::{Publication, PublicationId};
use d3_core::normalize::NormalizeOptions;
use d3_core::text::DEFAULT_THRESHOLD;
use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{
    AuditModeArg, AveragingArg, Config, DenominatorArg, ExtractorKind, FormatArg, NormalizerArg,
};

/// Invalid invocation: reported like a command-line parse error.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "d3", version, about = "Build, update and analyze a DBLP-derived research corpus.")]
pub struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Log filter, e.g. `info` or `d3=debug`.
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log_level: Option<String>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Upper bound for all worker pools.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a DBLP dump into a new store.
    Ingest(IngestArgs),
    /// Compare a newer dump with the store, optionally applying the changes.
    Diff(DiffArgs),
    /// Retrieve full texts and extract their metadata.
    Harvest(HarvestArgs),
    /// Link extracted affiliations and abstracts to publications and authors.
    Align(AlignArgs),
    /// Estimate the author-name mismatch rate of the alignment.
    Audit(AuditArgs),
    /// Build or summarize the in-corpus citation graph.
    Citegraph {
        #[command(subcommand)]
        action: CitegraphAction,
    },
    /// Emit report data (q1 to q8, or `all`).
    Report(ReportArgs),
    /// Write all records of one kind to a single file.
    Export(ExportArgs),
    /// Rewrite the chunks of every kind without superseded records.
    Compact(CompactArgs),
    /// Check manifest counts and indexes against the chunk files.
    Verify(StoreArg),
}

#[derive(Debug, Args)]
pub struct StoreArg {
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Store directory to create.
    #[arg(long, alias = "store")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// DTD with entity declarations.
    #[arg(long)]
    pub dtd: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub dtd: Option<PathBuf>,
    #[arg(long)]
    pub apply: bool,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// List the affected ids, not only their counts.
    #[arg(long)]
    pub ids: bool,
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    #[arg(long, value_enum)]
    pub extractor: Option<ExtractorKind>,
    #[arg(long)]
    pub extractor_endpoint: Option<String>,
    /// Metadata file for the fixture extractor.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Serve requests from a scripted schedule instead of the network.
    #[arg(long, value_name = "SCHEDULE")]
    pub simulate: Option<PathBuf>,
    /// Write the simulated server's request statistics here.
    #[arg(long, requires = "simulate")]
    pub sim_report: Option<PathBuf>,
    #[arg(long)]
    pub per_domain_limit: Option<usize>,
    /// Scratch directory for downloads; emptied after every chunk.
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub retries: Option<u32>,
    /// Harvest publications that already have a full-text record too.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<AuditModeArg>,
    /// Number of samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Publications per sample.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// JSONL gold labels.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CitegraphAction {
    /// Resolve bibliographies against corpus titles and store the graph.
    Build {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        chunk_size: Option<usize>,
    },
    /// Degree statistics, plus the external citation share with `--lookup`.
    Stats {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// `fixture:<path>` or `http:<endpoint>`.
        #[arg(long)]
        lookup: Option<String>,
        /// Size of the random sample used for the external share (default: all).
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// q1 to q8, or `all` together with `--out-dir`.
    pub which: String,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub venue: Option<String>,
    #[arg(long)]
    pub year_a: Option<i32>,
    #[arg(long)]
    pub year_b: Option<i32>,
    #[arg(long)]
    pub ref_year: Option<i32>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub min_count: Option<u64>,
    #[arg(long, value_enum)]
    pub denominator: Option<DenominatorArg>,
    #[arg(long, value_enum)]
    pub averaging: Option<AveragingArg>,
    #[arg(long)]
    pub include_final_year: bool,
    #[arg(long, value_enum)]
    pub normalizer: Option<NormalizerArg>,
    /// Comma-separated lower bin edges for q3.
    #[arg(long, value_delimiter = ',')]
    pub bin_edges: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// publications, authors, venues, affiliations, citations or fulltext.
    #[arg(long)]
    pub kind: Kind,
    /// Output file; a `.gz` suffix compresses.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompactArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
}

pub struct RunContext {
    pub config: Config,
    pub seed: u64,
    pub workers: usize,
}

impl RunContext {
    fn store_path(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        flag.clone()
            .or_else(|| self.config.store.clone())
            .ok_or_else(|| usage("--store is required (flag or `store` in the configuration file)"))
    }

    fn open_store(&self, flag: &Option<PathBuf>) -> Result<Store> {
        let path = self.store_path(flag)?;
        Ok(Store::open(&path)?)
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

pub fn load_config(cli: &Cli) -> Result<Config> {
    match &cli.config {
        Some(path) => Ok(Config::load(path)?),
        None => Ok(Config::default()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(out, &s)
}

fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(usage(format!("{name} must be at least 1")))
    } else {
        Ok(v)
    }
}

fn threshold(v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(usage(format!("threshold must lie in [0, 1], got {v}")))
    }
}

fn load_corpus(dump: &Path, dtd: Option<&Path>) -> Result<Corpus> {
    let mut entities = EntityTable::builtin();
    if let Some(dtd) = dtd {
        entities.load_dtd(dtd).with_context(|| format!("reading DTD {}", dtd.display()))?;
    }
    let input = open_dump(dump).with_context(|| format!("opening dump {}", dump.display()))?;
    let reader = DumpReader::new(input, entities);
    Ok(build_corpus(reader, &NormalizeOptions::for_current_year(current_year()))?)
}

pub async fn dispatch(cli: Cli, ctx: RunContext) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a, &ctx),
        Command::Diff(a) => diff(a, &ctx),
        Command::Harvest(a) => harvest(a, &ctx).await,
        Command::Align(a) => align(a, &ctx),
        Command::Audit(a) => audit(a, &ctx),
        Command::Citegraph { action } => citegraph(action, &ctx),
        Command::Report(a) => report(a, &ctx),
        Command::Export(a) => {
            let store = ctx.open_store(&a.store)?;
            let n = store.export(a.kind, &a.out)?;
            emit_json(None, &json!({"kind": a.kind.to_string(), "records": n, "out": a.out}))
        }
        Command::Compact(a) => {
            let mut store = ctx.open_store(&a.store)?;
            let chunk = positive("--chunk-size", a.chunk_size.or(ctx.config.compact.chunk_size).unwrap_or(DEFAULT_CHUNK_SIZE))?;
            let manifest = store.compact(chunk)?.clone();
            emit_json(None, &json!({"generation": manifest.generation}))
        }
        Command::Verify(a) => {
            let store = ctx.open_store(&a.store)?;
            store.verify()?;
            let counts: BTreeMap<String, usize> =
                Kind::ALL.iter().map(|k| Ok((k.to_string(), store.count(*k)?))).collect::<Result<_>>()?;
            emit_json(None, &json!({"ok": true, "records": counts}))
        }
    }
}

fn ingest(a: IngestArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config.ingest;
    let dump = a.dump.or_else(|| cfg.dump.clone()).ok_or_else(|| usage("--dump is required"))?;
    let out = ctx.store_path(&a.out)?;
    let chunk = positive("--chunk-size", a.chunk_size.or(cfg.chunk_size).unwrap_or(DEFAULT_CHUNK_SIZE))?;
    let dtd = a.dtd.or_else(|| cfg.dtd.clone());
    if out.join("manifest.json").exists() {
        return Err(usage(format!("{} already holds a store; use `diff --apply` to update it", out.display())));
    }
    let corpus = load_corpus(&dump, dtd.as_deref())?;
    let mut store = Store::create(&out)?;
    write_corpus(&mut store, &corpus, chunk)?;
    info!("ingested {} publications into {}", corpus.stats.publications, out.display());
    emit_json(None, &corpus.stats)
}

fn diff(a: DiffArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config.ingest;
    let mut store = ctx.open_store(&a.store)?;
    let dump = a.dump.or_else(|| cfg.dump.clone()).ok_or_else(|| usage("--dump is required"))?;
    let dtd = a.dtd.or_else(|| cfg.dtd.clone());
    let chunk = positive("--chunk-size", a.chunk_size.or(cfg.chunk_size).unwrap_or(DEFAULT_CHUNK_SIZE))?;
    let corpus = load_corpus(&dump, dtd.as_deref())?;
    let cs = diff_against_store(&store, &corpus)?;
    let mut doc = json!({
        "added": cs.added.len(),
        "modified": cs.modified.len(),
        "removed": cs.removed.len(),
    });
    if a.ids {
        let ids = |v: &[Publication]| v.iter().map(|p| p.id.as_str().to_string()).collect::<Vec<_>>();
        doc["added_ids"] = json!(ids(&cs.added));
        doc["modified_ids"] = json!(ids(&cs.modified));
        doc["removed_ids"] = json!(cs.removed);
    }
    if a.apply {
        let report = apply_changeset(&mut store, &cs, &corpus, chunk)?;
        doc["applied"] = serde_json::to_value(report)?;
    }
    emit_json(None, &doc)
}

async fn harvest(a: HarvestArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config.harvest;
    let mut store = ctx.open_store(&a.store)?;
    let chunk_size = positive("--chunk-size", a.chunk_size.or(cfg.chunk_size).unwrap_or(1000))?;
    let per_domain = positive("--per-domain-limit", a.per_domain_limit.or(cfg.per_domain_limit).unwrap_or(2))?;
    let extractor_kind = a.extractor.or(cfg.extractor).unwrap_or(ExtractorKind::External);
    let extractor: Arc<dyn Extractor> = match extractor_kind {
        ExtractorKind::Fixture => {
            let path = a
                .sidecar
                .or_else(|| cfg.sidecar.clone())
                .ok_or_else(|| usage("--extractor fixture needs --sidecar"))?;
            Arc::new(SidecarExtractor::load(&path).with_context(|| format!("reading {}", path.display()))?)
        }
        ExtractorKind::External => {
            let endpoint = a
                .extractor_endpoint
                .or_else(|| cfg.extractor_endpoint.clone())
                .unwrap_or_else(|| "http://localhost:8070".into());
            Arc::new(GrobidExtractor::new(&endpoint, Duration::from_secs(300)))
        }
    };
    let mut policy = RetryPolicy::default();
    if let Some(t) = a.timeout_secs.or(cfg.timeout_secs) {
        policy.request_timeout = Duration::from_secs(t);
    }
    if let Some(r) = a.retries.or(cfg.retries) {
        policy.max_retries = r;
    }
    let simulate = a.simulate.or_else(|| cfg.simulate.clone());
    let sim = match &simulate {
        Some(path) => Some(Arc::new(SimulatedServer::new(
            Schedule::load(path).with_context(|| format!("reading schedule {}", path.display()))?,
        ))),
        None => None,
    };
    let transport: Arc<dyn Transport> = match &sim {
        Some(s) => s.clone(),
        None => Arc::new(HttpTransport::new(policy.request_timeout)?),
    };
    let work_dir = a
        .work_dir
        .or_else(|| cfg.work_dir.clone())
        .unwrap_or_else(|| std::env::temp_dir().join(format!("d3-harvest-{}", std::process::id())));

    let mut links: BTreeMap<PublicationId, Vec<String>> = BTreeMap::new();
    for p in store.scan::<Publication>()? {
        let p = p?;
        if a.all || store.get_line(Kind::Fulltext, p.id.as_str())?.is_none() {
            links.insert(p.id, p.links);
        }
    }
    let ids: Vec<PublicationId> = links.keys().cloned().collect();
    let chunks = plan_chunks(&ids, chunk_size).map_err(|e| usage(e.to_string()))?;
    info!("harvesting {} publications in {} chunks", ids.len(), chunks.len());

    let harvester = Harvester {
        transport,
        limiter: Arc::new(DomainLimiter::new(per_domain)),
        extractor,
        policy,
        work_dir: work_dir.clone(),
    };
    let commit_chunk = chunk_size.max(1);
    let report = harvester
        .run(chunks, Arc::new(links), ctx.workers, |outcome| {
            let mut batch = Batch::new();
            for r in &outcome.records {
                batch.put::<FulltextRecord>(r).map_err(std::io::Error::other)?;
            }
            store.commit(batch, commit_chunk).map_err(std::io::Error::other)?;
            Ok(())
        })
        .await?;
    // Only our own empty scratch root is removed.
    let _ = std::fs::remove_dir(&work_dir);
    if let (Some(s), Some(path)) = (&sim, a.sim_report) {
        let mut text = serde_json::to_string_pretty(&s.report())?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    emit_json(None, &report)
}

fn align(a: AlignArgs, ctx: &RunContext) -> Result<()> {
    let mut store = ctx.open_store(&a.store)?;
    let t = threshold(a.threshold.or(ctx.config.align.threshold).unwrap_or(DEFAULT_THRESHOLD))?;
    let chunk = positive("--chunk-size", a.chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE))?;
    let report = align_store(&mut store, t, chunk)?;
    emit_json(None, &report)
}

fn audit(a: AuditArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config.audit;
    let store = ctx.open_store(&a.store)?;
    let gold_path = a.gold.or_else(|| cfg.gold.clone());
    let gold = match &gold_path {
        Some(p) => Some(load_gold(p).with_context(|| format!("reading gold labels {}", p.display()))?),
        None => None,
    };
    let items = audit_items(&store, gold.as_ref())?;
    let mode = match a.mode.or(cfg.mode).unwrap_or(AuditModeArg::Uniform) {
        AuditModeArg::Uniform => AuditMode::Uniform,
        AuditModeArg::Adversarial => AuditMode::Adversarial,
    };
    let config = AuditConfig {
        sample_count: positive("--samples", a.samples.or(cfg.samples).unwrap_or(20))?,
        sample_size: positive("--n", a.n.or(cfg.n).unwrap_or(100))?,
        seed: ctx.seed,
        mode,
        permutations: positive("--permutations", a.permutations.or(cfg.permutations).unwrap_or(10_000))?,
        threshold: threshold(a.threshold.or(cfg.threshold).unwrap_or(DEFAULT_THRESHOLD))?,
    };
    let report = mismatch_audit(&items, &config)?;
    emit_json(a.out.as_deref(), &json!({
        "mode": report.mode,
        "rate": report.rate,
        "p_value": report.p_value,
        "names": report.names,
        "mismatches": report.mismatches,
        "samples": report.samples,
        "sample_size": config.sample_size,
        "permutations": config.permutations,
        "seed": config.seed,
        "scores": report.scores,
    }))
}

fn make_lookup(spec: &str, store: &Store) -> Result<Box<dyn CitationLookup>> {
    if let Some(path) = spec.strip_prefix("fixture:") {
        return Ok(Box::new(FixtureLookup::load(Path::new(path)).with_context(|| format!("reading {path}"))?));
    }
    if let Some(endpoint) = spec.strip_prefix("http:") {
        let mut dois = HashMap::new();
        for p in store.scan::<Publication>()? {
            let p = p?;
            if let Some(doi) = p.doi {
                dois.insert(p.id, doi);
            }
        }
        return Ok(Box::new(HttpLookup::new(endpoint, dois)?));
    }
    Err(usage(format!("--lookup must be fixture:<path> or http:<endpoint>, got {spec:?}")))
}

fn citegraph(action: CitegraphAction, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config.citegraph;
    match action {
        CitegraphAction::Build { store, threshold: t, chunk_size } => {
            let mut store = ctx.open_store(&store)?;
            let t = threshold(t.or(cfg.threshold).unwrap_or(DEFAULT_THRESHOLD))?;
            let (graph, report) = build_citation_graph(&store, t)?;
            write_citation_graph(&mut store, &graph, positive("--chunk-size", chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE))?)?;
            emit_json(None, &report)
        }
        CitegraphAction::Stats { store, format, lookup, sample, out } => {
            let store = ctx.open_store(&store)?;
            let graph = load_citation_graph(&store)?;
            let corpus = store.count(Kind::Publications)?;
            let stats = citation_stats(&graph, corpus);
            let mut rendered = d3::reports::q7_citation_stats(&stats);
            rendered.json["report"] = json!("citegraph-stats");
            if let Some(spec) = lookup.or_else(|| cfg.lookup.clone()) {
                let lookup = make_lookup(&spec, &store)?;
                let mut ids: Vec<PublicationId> = Vec::with_capacity(corpus);
                for line in store.scan_lines(Kind::Publications)? {
                    ids.push(PublicationId::new(line?.0));
                }
                if let Some(n) = sample.or(cfg.sample) {
                    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(ctx.seed));
                    ids.truncate(n);
                    ids.sort();
                }
                let share = external_citation_share(&ids, &graph, lookup.as_ref())?;
                rendered.rows.push(vec!["external_share".into(), format!("{}", share.share), String::new()]);
                rendered.json["external"] = serde_json::to_value(&share)?;
            }
            let format = match format.or(ctx.config.report.format).unwrap_or(FormatArg::Json) {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            emit(out.as_deref(), &rendered.render(format))
        }
    }
}

fn report(a: ReportArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.config.report;
    let store = ctx.open_store(&a.store)?;
    let format = match a.format.or(cfg.format).unwrap_or(FormatArg::Csv) {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let opts = ReportOptions {
        venue: a.venue.or_else(|| cfg.venue.clone()),
        year_a: a.year_a.or(cfg.year_a),
        year_b: a.year_b.or(cfg.year_b),
        ref_year: a.ref_year.or(cfg.ref_year),
        top_k: positive("--top-k", a.top_k.or(cfg.top_k).unwrap_or(30))?,
        min_count: a.min_count.or(cfg.min_count).unwrap_or(1),
        denominator: match a.denominator.or(cfg.denominator).unwrap_or(DenominatorArg::WindowLocal) {
            DenominatorArg::WindowLocal => DenominatorMode::WindowLocal,
            DenominatorArg::AllTime => DenominatorMode::AllTime,
        },
        averaging: match a.averaging.or(cfg.averaging).unwrap_or(AveragingArg::Geometric) {
            AveragingArg::Geometric => GrowthAveraging::Geometric,
            AveragingArg::Arithmetic => GrowthAveraging::Arithmetic,
        },
        include_final_year: a.include_final_year || cfg.include_final_year.unwrap_or(false),
        normalizer: match a.normalizer.or(cfg.normalizer).unwrap_or(NormalizerArg::Singular) {
            NormalizerArg::Singular => Normalizer::Singular,
            NormalizerArg::Identity => Normalizer::Identity,
        },
        bin_edges: a.bin_edges.or_else(|| cfg.bin_edges.clone()).unwrap_or_else(|| DEFAULT_BIN_EDGES.to_vec()),
    };
    let data = ReportData::load(&store)?;
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    if a.which.eq_ignore_ascii_case("all") {
        let dir = a.out_dir.ok_or_else(|| usage("`report all` needs --out-dir"))?;
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for id in ReportId::ALL {
            let text = run_report(id, &data, &opts)?.render(format);
            emit(Some(&dir.join(format!("{id}.{ext}"))), &text)?;
        }
        return Ok(());
    }
    let id: ReportId = a.which.parse().map_err(|e: d3::reports::ReportError| usage(e.to_string()))?;
    let text = run_report(id, &data, &opts)?.render(format);
    let out = match (a.out, a.out_dir) {
        (Some(out), _) => Some(out),
        (None, Some(dir)) => {
            std::fs::create_dir_all(&dir)?;
            Some(dir.join(format!("{id}.{ext}")))
        }
        (None, None) => None,
    };
    emit(out.as_deref(), &text)
}

/// Machine-readable category of a failure, taken from the first typed
/// error in its chain.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if cause.is::<d3::store::StoreError>() {
            return "store";
        }
        if cause.is::<d3::xml::ParseError>() {
            return "parse";
        }
        if cause.is::<d3::ingest::IngestError>() {
            return "ingest";
        }
        if cause.is::<d3::reports::ReportError>() {
            return "report";
        }
        if cause.is::<d3_core::audit::AuditError>() {
            return "audit";
        }
        if cause.is::<d3_core::citegraph::ExternalShareError>() {
            return "lookup";
        }
        if cause.is::<crate::config::ConfigError>() {
            return "config";
        }
        if cause.is::<reqwest::Error>() {
            return "network";
        }
        if cause.is::<serde_json::Error>() {
            return "format";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "error"
}

pub fn is_usage(err: &anyhow::Error) -> bool {
    err.chain().any(|c| c.is::<UsageError>())
}
