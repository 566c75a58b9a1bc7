//! Acceptance criteria 1 to 11, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so that every line is printed even when
//! output capture is on: `cargo test -p d3 --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use d3::harvest::extract::{ExtractError, Extractor, SidecarExtractor};
use d3::harvest::fetch::RetryPolicy;
use d3::harvest::limiter::DomainLimiter;
use d3::harvest::sim::{Route, Schedule, ScriptedResponse, SimulatedServer};
use d3::harvest::Harvester;
use d3::ingest::{apply_changeset, diff_against_store, write_corpus};
use d3::reports::{run_report, ReportData, ReportId, ReportOptions};
use d3::stages::FixtureLookup;
use d3::store::{Kind, Store};
use d3::synth::{generate, render_dump, SynthConfig, SynthRecord};
use d3_core::analytics::{
    active_matrix, counts_by_type, cubic_fit, ActivityIndex, DenominatorMode, ACTIVITY_GRID,
};
use d3_core::chunk::ChunkPlan;
use d3_core::citegraph::{build_graph, build_title_index, citation_stats, external_citation_share, CitationGraph};
use d3_core::model::{Access, Author, BibEntry, FullTextMetadata, PubType, Publication, PublicationId, Venue};
use d3_core::model::{AuthorId, SecondaryMetadata};
use d3_core::Date;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    number: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 11] = [
    Criterion { number: 1, name: "schema fidelity", budget: Some(Duration::from_secs(5)), run: schema_fidelity },
    Criterion { number: 2, name: "type partition", budget: Some(Duration::from_secs(5)), run: type_partition },
    Criterion { number: 3, name: "politeness harness", budget: Some(Duration::from_secs(60)), run: politeness },
    Criterion { number: 4, name: "no residue", budget: Some(Duration::from_secs(30)), run: no_residue },
    Criterion { number: 5, name: "alignment audit", budget: Some(Duration::from_secs(60)), run: alignment_audit },
    Criterion { number: 6, name: "citation-graph oracle", budget: Some(Duration::from_secs(60)), run: citation_oracle },
    Criterion { number: 7, name: "citation stats", budget: Some(Duration::from_secs(10)), run: citation_stats_naive },
    Criterion { number: 8, name: "active-researcher matrix", budget: Some(Duration::from_secs(30)), run: activity_matrix },
    Criterion { number: 9, name: "cubic fit", budget: Some(Duration::from_secs(10)), run: cubic_fits },
    Criterion { number: 10, name: "diff correctness", budget: Some(Duration::from_secs(30)), run: diff_correctness },
    Criterion { number: 11, name: "end-to-end determinism", budget: None, run: end_to_end },
];

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &CRITERIA {
        let label = format!("criterion {:>2} ({})", c.number, c.name);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let took = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(()), Some(b)) if took > b => Err(format!("took {took:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(()) => println!("{label}: PASS ({took:.2?})"),
            Err(e) => {
                failed += 1;
                println!("{label}: FAIL ({took:.2?}) {e}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

fn export_keys(store: &Store, kind: Kind) -> Result<Vec<BTreeMap<String, Value>>, String> {
    let dir = tempdir();
    let out = dir.path().join("export.jsonl");
    store.export(kind, &out).map_err(|e| e.to_string())?;
    std::fs::read_to_string(&out)
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect()
}

fn check_fields(kind: &str, records: &[BTreeMap<String, Value>], expected: &[&str]) -> Outcome {
    ensure!(!records.is_empty(), "no {kind} exported");
    let expected: BTreeSet<&str> = expected.iter().copied().collect();
    let mut seen = BTreeSet::new();
    for r in records {
        for k in r.keys() {
            ensure!(expected.contains(k.as_str()), "{kind} has unexpected field {k}");
            seen.insert(k.clone());
        }
    }
    let missing: Vec<_> = expected.iter().filter(|k| !seen.contains(**k)).collect();
    ensure!(missing.is_empty(), "{kind} fields never present: {missing:?}");
    Ok(())
}

fn schema_fidelity() -> Outcome {
    let dir = tempdir();
    let store = common::aligned_store(&common::fixture("mini"), &dir.path().join("store"));

    let pubs = export_keys(&store, Kind::Publications)?;
    check_fields(
        "publication",
        &pubs,
        &[
            // primary
            "id", "mdate", "title", "pages", "year", "type", "access", "links", "doi", "publisher", "authors", "venue",
            // secondary
            "ocr_title", "ocr_abstract", "keywords", "outgoing", "incoming",
        ],
    )?;
    for p in &pubs {
        for side in ["outgoing", "incoming"] {
            if let Some(Value::Object(o)) = p.get(side) {
                let keys: Vec<&str> = o.keys().map(String::as_str).collect();
                ensure!(keys == ["count", "ids"], "{side} block has fields {keys:?}");
                ensure!(
                    o["count"].as_u64() == o["ids"].as_array().map(|a| a.len() as u64),
                    "{side} count disagrees with ids in {}",
                    p["id"]
                );
            }
        }
    }
    check_fields("author", &export_keys(&store, Kind::Authors)?, &["id", "fullname", "webpage", "affiliations"])?;
    check_fields("venue", &export_keys(&store, Kind::Venues)?, &["id", "names", "acronyms", "type"])?;
    check_fields(
        "affiliation",
        &export_keys(&store, Kind::Affiliations)?,
        &["id", "name", "country", "city", "postcode", "addressline"],
    )
}

fn type_partition() -> Outcome {
    let dir = tempdir();
    let mini = common::fixture("mini");
    let store = common::aligned_store(&mini, &dir.path().join("store"));
    let pubs: Vec<Publication> = store.read_all().map_err(|e| e.to_string())?;
    let counts = counts_by_type(&pubs);
    let share_sum: f64 = counts.values().map(|c| c.share).sum();
    ensure!((share_sum - 1.0).abs() <= 1e-9, "shares sum to {share_sum}");
    ensure!(counts.len() == 7 && PubType::ALL.iter().all(|t| counts.contains_key(t)), "types present: {counts:?}");
    ensure!(counts.values().map(|c| c.count).sum::<usize>() == pubs.len(), "counts do not partition the corpus");

    let expected = generate(&SynthConfig::default()).type_counts;
    for (t, n) in &expected {
        ensure!(counts[t].count == *n, "{t:?}: {} counted, {n} generated", counts[t].count);
    }

    let golden = std::fs::read_to_string(mini.join("golden/q1.csv")).map_err(|e| e.to_string())?;
    ensure!(golden.lines().next() == Some("Paper Type,Count,Proportion"), "golden header {:?}", golden.lines().next());
    let data = ReportData::load(&store).map_err(|e| e.to_string())?;
    let rendered = run_report(ReportId::Q1, &data, &ReportOptions::default()).map_err(|e| e.to_string())?;
    let csv = rendered.to_csv();
    ensure!(csv == golden, "q1 differs from golden:\n{csv}");
    for line in golden.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        ensure!(cells.len() == 3, "row {line:?}");
        if cells[0] == "total" {
            ensure!(cells[1] == pubs.len().to_string() && cells[2] == "100%", "total row {line:?}");
            continue;
        }
        let count: usize = cells[1].parse().map_err(|_| format!("count in {line:?}"))?;
        ensure!(cells[2] == format!("{:.2}%", count as f64 * 100.0 / pubs.len() as f64), "proportion in {line:?}");
    }
    Ok(())
}

struct AcceptAll;

impl Extractor for AcceptAll {
    fn extract(&self, id: &PublicationId, _pdf: &[u8]) -> Result<FullTextMetadata, ExtractError> {
        Ok(FullTextMetadata { publication_id: id.clone(), ..Default::default() })
    }
}

fn paused_runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread().enable_all().start_paused(true).build().expect("runtime")
}

fn pdf_response(delay_ms: u64) -> ScriptedResponse {
    ScriptedResponse {
        status: 200,
        delay_ms,
        headers: BTreeMap::from([("Content-Type".into(), "application/pdf".into())]),
        body: "%PDF-1.4 {path}".into(),
    }
}

fn random_schedule(rng: &mut ChaCha8Rng) -> (Schedule, BTreeMap<PublicationId, Vec<String>>) {
    let domains = rng.random_range(1..=4);
    let mut routes = Vec::new();
    let mut links = BTreeMap::new();
    for d in 0..domains {
        for i in 0..rng.random_range(4..=25) {
            let url = format!("https://host{d}.example/doc/{i}.pdf");
            let mut responses = Vec::new();
            for _ in 0..rng.random_range(0..=2) {
                if rng.random_bool(0.3) {
                    responses.push(ScriptedResponse {
                        status: 429,
                        delay_ms: rng.random_range(0..200),
                        headers: BTreeMap::from([("Retry-After".into(), "3".into())]),
                        body: String::new(),
                    });
                }
            }
            responses.push(if rng.random_bool(0.1) {
                ScriptedResponse::status(404)
            } else {
                pdf_response(rng.random_range(0..1500))
            });
            links.insert(PublicationId::new(format!("p/{d}/{i}")), vec![url.clone()]);
            routes.push(Route { url, responses });
        }
    }
    (Schedule { default: ScriptedResponse::status(404), routes }, links)
}

fn politeness() -> Outcome {
    let mut peaks_at_limit = 0;
    let mut throttled = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (schedule, links) = random_schedule(&mut rng);
        let work = tempdir();
        let rt = paused_runtime();
        let server = rt.block_on(async {
            let server = Arc::new(SimulatedServer::new(schedule));
            let harvester = Harvester {
                transport: server.clone(),
                limiter: Arc::new(DomainLimiter::new(2)),
                extractor: Arc::new(AcceptAll),
                policy: RetryPolicy::default(),
                work_dir: work.path().to_path_buf(),
            };
            let chunk = ChunkPlan { chunk_index: 0, publication_ids: links.keys().cloned().collect() };
            let outcome = harvester.harvest_chunk(&chunk, &links).await.expect("chunk harvested");
            assert_eq!(outcome.records.len(), links.len());
            server
        });
        let report = server.report();
        for (domain, peak) in &report.peak_in_flight {
            ensure!(*peak <= 2, "seed {seed}: {peak} concurrent requests to {domain}");
        }
        ensure!(report.cooldown_violations.is_empty(), "seed {seed}: {:?}", report.cooldown_violations);
        peaks_at_limit += usize::from(report.peak_in_flight.values().any(|&p| p == 2));
        throttled += usize::from(!server.windows().is_empty());
    }
    ensure!(peaks_at_limit > 100 && throttled > 100, "harness too weak: {peaks_at_limit} saturated, {throttled} throttled");
    Ok(())
}

/// Counts the files present in the scratch directory at extraction time.
struct Spy {
    inner: SidecarExtractor,
    work: PathBuf,
    seen: std::sync::Mutex<Vec<usize>>,
}

fn files_under(dir: &std::path::Path) -> usize {
    let Ok(entries) = std::fs::read_dir(dir) else { return 0 };
    entries
        .map(|e| e.expect("entry").path())
        .map(|p| if p.is_dir() { files_under(&p) } else { 1 })
        .sum()
}

impl Extractor for Spy {
    fn extract(&self, id: &PublicationId, pdf: &[u8]) -> Result<FullTextMetadata, ExtractError> {
        self.seen.lock().expect("spy").push(files_under(&self.work));
        self.inner.extract(id, pdf)
    }
}

fn no_residue() -> Outcome {
    let mini = common::fixture("mini");
    let schedule = Schedule::load(&mini.join("schedule.json")).map_err(|e| e.to_string())?;
    let corpus = common::corpus_from_xml(&std::fs::read_to_string(mini.join("dump.xml")).map_err(|e| e.to_string())?);
    let pubs: Vec<&Publication> = corpus.publications.iter().take(100).collect();
    let links: BTreeMap<PublicationId, Vec<String>> = pubs.iter().map(|p| (p.id.clone(), p.links.clone())).collect();
    let work = tempdir();
    let spy = Arc::new(Spy {
        inner: SidecarExtractor::load(&mini.join("sidecar.jsonl")).map_err(|e| e.to_string())?,
        work: work.path().to_path_buf(),
        seen: Default::default(),
    });
    let rt = paused_runtime();
    let outcome = rt.block_on(async {
        let harvester = Harvester {
            transport: Arc::new(SimulatedServer::new(schedule)),
            limiter: Arc::new(DomainLimiter::new(2)),
            extractor: spy.clone(),
            policy: RetryPolicy::default(),
            work_dir: work.path().to_path_buf(),
        };
        let chunk = ChunkPlan { chunk_index: 0, publication_ids: links.keys().cloned().collect() };
        harvester.harvest_chunk(&chunk, &links).await
    });
    let outcome = outcome.map_err(|e| e.to_string())?;
    ensure!(outcome.records.len() == 100, "{} records", outcome.records.len());
    let r = outcome.report;
    ensure!(r.extracted > 0 && r.rejected > 0 && r.unreachable > 0, "fixture slice lacks variety: {r:?}");
    let seen = spy.seen.lock().expect("spy").clone();
    ensure!(seen.len() == r.fetched && seen.iter().all(|&n| n > 0), "downloads not on disk during extraction: {seen:?}");
    let left = files_under(work.path());
    ensure!(left == 0, "{left} files left in the scratch directory");
    Ok(())
}

fn alignment_audit() -> Outcome {
    let planted = common::fixture("planted");
    let dir = tempdir();
    let store = dir.path().join("store");
    let s = store.to_str().expect("utf-8 path");
    let f = |n: &str| planted.join(n).to_str().expect("utf-8 path").to_string();
    common::d3_ok(&["ingest", "--dump", &f("dump.xml"), "--out", s]);
    common::d3_ok(&[
        "harvest", "--store", s, "--extractor", "fixture", "--sidecar", &f("sidecar.jsonl"), "--simulate",
        &f("schedule.json"),
    ]);
    common::d3_ok(&["align", "--store", s]);

    // The fixture's own ratio, read independently of the pipeline.
    let mut names = 0usize;
    let mut corrupted = 0usize;
    for line in std::fs::read_to_string(planted.join("gold.jsonl")).map_err(|e| e.to_string())?.lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        for (printed, real) in v["names"].as_object().expect("names object") {
            names += 1;
            corrupted += usize::from(printed != real.as_str().expect("string"));
        }
    }
    ensure!(corrupted * 100 == names * 5, "fixture plants {corrupted} of {names}");

    for mode in ["uniform", "adversarial"] {
        let out = common::d3_ok(&[
            "--seed", "11", "audit", "--store", s, "--gold", &f("gold.jsonl"), "--mode", mode, "--n", "100",
            "--permutations", "10000",
        ]);
        let v: Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
        ensure!(v["rate"].as_f64() == Some(0.05), "{mode}: rate {}", v["rate"]);
        let p = v["p_value"].as_f64().ok_or_else(|| format!("{mode}: no p-value"))?;
        ensure!(p < 0.001, "{mode}: p = {p}");
    }
    Ok(())
}

fn normalize_title(s: &str) -> String {
    let mapped: String = s.to_lowercase().chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn sim(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        1.0
    } else {
        1.0 - edit_distance(a, b) as f64 / n as f64
    }
}

/// All-pairs matcher: best-scoring title at or above the threshold; ties
/// prefer the entry's year, then the smallest id.
fn brute_force_graph(pubs: &[Publication], bibs: &[(PublicationId, Vec<BibEntry>)], threshold: f64) -> BTreeSet<(String, String)> {
    let mut edges = BTreeSet::new();
    for (source, entries) in bibs {
        for e in entries {
            let q = normalize_title(&e.title);
            if q.is_empty() {
                continue;
            }
            let scored: Vec<(f64, &Publication)> =
                pubs.iter().filter(|p| !normalize_title(&p.title).is_empty()).map(|p| (sim(&q, &normalize_title(&p.title)), p)).collect();
            let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
            if best < threshold - 1e-9 {
                continue;
            }
            let target = scored
                .iter()
                .filter(|s| s.0 == best)
                .map(|s| s.1)
                .min_by_key(|p| (!(e.year.is_some() && p.year == e.year), p.id.clone()))
                .expect("non-empty");
            if &target.id != source {
                edges.insert((source.as_str().to_string(), target.id.as_str().to_string()));
            }
        }
    }
    edges
}

const WORDS: [&str; 12] =
    ["neural", "parsing", "graph", "models", "language", "deep", "learning", "corpus", "tagging", "semantic", "web", "data"];

fn publication(id: String, title: String, year: i32, authors: Vec<AuthorId>) -> Publication {
    Publication {
        id: PublicationId::new(id),
        modified_date: Date::new(2021, 1, 1).expect("date"),
        title,
        pages: None,
        year: Some(year),
        pub_type: PubType::InProceedings,
        access: Access::Unknown,
        links: vec![],
        doi: None,
        publisher: None,
        author_ids: authors,
        venue_id: None,
        secondary: SecondaryMetadata::default(),
    }
}

fn mutate(rng: &mut ChaCha8Rng, s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    for _ in 0..rng.random_range(0..5) {
        if chars.is_empty() {
            break;
        }
        let i = rng.random_range(0..chars.len());
        match rng.random_range(0..3) {
            0 => {
                chars.remove(i);
            }
            1 => chars.insert(i, *['x', 'e', ' ', '-'].choose(rng).expect("non-empty")),
            _ => chars[i] = 'z',
        }
    }
    chars.into_iter().collect()
}

fn random_citation_fixture(seed: u64) -> (Vec<Publication>, Vec<(PublicationId, Vec<BibEntry>)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pubs = Vec::new();
    for i in 0..50 {
        let title = if i > 0 && rng.random_bool(0.1) {
            // Exact and near duplicates exercise the tie-breaks.
            let other: &Publication = &pubs[rng.random_range(0..i)];
            if rng.random_bool(0.5) { other.title.clone() } else { mutate(&mut rng, &other.title) }
        } else {
            (0..rng.random_range(2..7)).map(|_| *WORDS.choose(&mut rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
        };
        pubs.push(publication(format!("p/{i:02}"), title, rng.random_range(2015..2019), vec![]));
    }
    let bibs = pubs
        .iter()
        .map(|p| {
            let entries = (0..rng.random_range(0..8))
                .map(|_| {
                    let cited = pubs.choose(&mut rng).expect("non-empty");
                    let title = if rng.random_bool(0.15) { "unrelated external work".to_string() } else { mutate(&mut rng, &cited.title) };
                    BibEntry { title, authors: vec![], year: rng.random_bool(0.7).then_some(cited.year.expect("year")) }
                })
                .collect();
            (p.id.clone(), entries)
        })
        .collect();
    (pubs, bibs)
}

fn edge_set(g: &CitationGraph) -> BTreeSet<(String, String)> {
    g.edges().map(|(a, b)| (a.as_str().to_string(), b.as_str().to_string())).collect()
}

fn citation_oracle() -> Outcome {
    for seed in 0..20 {
        let (pubs, bibs) = random_citation_fixture(seed);
        let index = build_title_index(&pubs);
        let mut previous: Option<BTreeSet<(String, String)>> = None;
        for threshold in [0.9, 0.8, 0.7] {
            let g = build_graph(bibs.iter().map(|(id, e)| (id, e.as_slice())), &index, threshold);
            let edges = edge_set(&g);
            let oracle = brute_force_graph(&pubs, &bibs, threshold);
            ensure!(edges == oracle, "seed {seed} threshold {threshold}: {:?} vs {:?}", edges.symmetric_difference(&oracle).collect::<Vec<_>>(), ());
            let transposed: BTreeSet<(String, String)> = g
                .incoming
                .iter()
                .flat_map(|(t, sources)| sources.iter().map(move |s| (s.as_str().to_string(), t.as_str().to_string())))
                .collect();
            ensure!(transposed == edges && g.is_transpose_consistent(), "seed {seed}: incoming is not the transpose");
            if let Some(stricter) = &previous {
                ensure!(stricter.is_subset(&edges), "seed {seed}: lowering to {threshold} lost edges");
            }
            previous = Some(edges);
        }
    }
    Ok(())
}

fn citation_stats_naive() -> Outcome {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..120);
        let ids: Vec<PublicationId> = (0..n).map(|i| PublicationId::new(format!("p/{i}"))).collect();
        let resolved: Vec<_> = ids
            .iter()
            .map(|s| (s.clone(), (0..rng.random_range(0..6)).map(|_| ids.choose(&mut rng).expect("ids").clone()).collect(), 0))
            .collect();
        let g = CitationGraph::from_resolved(resolved.clone());
        let stats = citation_stats(&g, n);

        let mut indeg: HashMap<&PublicationId, BTreeSet<&PublicationId>> = HashMap::new();
        let mut outdeg: HashMap<&PublicationId, BTreeSet<&PublicationId>> = HashMap::new();
        for (s, targets, _) in &resolved {
            for t in targets.iter().filter(|t| *t != s) {
                indeg.entry(t).or_default().insert(s);
                outdeg.entry(s).or_default().insert(t);
            }
        }
        let degrees = |m: &HashMap<&PublicationId, BTreeSet<&PublicationId>>| {
            let mut v: Vec<usize> = ids.iter().map(|i| m.get(i).map_or(0, BTreeSet::len)).collect();
            v.sort();
            v
        };
        let (ins, outs) = (degrees(&indeg), degrees(&outdeg));
        let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
        let median = |v: &[usize]| if v.len() % 2 == 1 { v[v.len() / 2] as f64 } else { (v[v.len() / 2 - 1] + v[v.len() / 2]) as f64 / 2.0 };
        let zero = ins.iter().filter(|&&d| d == 0).count();
        ensure!(stats.mean_in == mean(&ins) && stats.mean_out == mean(&outs), "seed {seed}: means");
        ensure!(stats.median_in == median(&ins) && stats.median_out == median(&outs), "seed {seed}: medians");
        ensure!(stats.zero_in_count == zero && stats.zero_in_share == zero as f64 / n as f64, "seed {seed}: zero share");
    }

    // 1577 in-corpus citations against 2000 external ones, plus one id the
    // lookup does not know.
    let targets: Vec<PublicationId> = (0..10).map(|i| PublicationId::new(format!("t/{i}"))).collect();
    let in_degrees = [300, 250, 200, 180, 160, 150, 120, 100, 77, 40];
    let extras = [100, 80, 60, 50, 40, 33, 25, 20, 10, 5];
    assert_eq!(in_degrees.iter().sum::<usize>(), 1577);
    assert_eq!(extras.iter().sum::<usize>(), 423);
    let mut resolved = Vec::new();
    for c in 0..300 {
        let cites: Vec<PublicationId> =
            targets.iter().zip(in_degrees).filter(|(_, d)| c < *d).map(|(t, _)| t.clone()).collect();
        resolved.push((PublicationId::new(format!("c/{c}")), cites, 0));
    }
    let g = CitationGraph::from_resolved(resolved);
    let totals: HashMap<String, u64> =
        targets.iter().zip(in_degrees.iter().zip(extras)).map(|(t, (d, e))| (t.as_str().to_string(), (d + e) as u64)).collect();
    let mut sample = targets.clone();
    sample.push(PublicationId::new("t/unknown"));
    let share = external_citation_share(&sample, &g, &FixtureLookup::from_totals(totals)).map_err(|e| e.to_string())?;
    ensure!((share.share - 0.2115).abs() <= 1e-9, "external share {}", share.share);
    ensure!(share.skipped == [PublicationId::new("t/unknown")] && share.used == 10, "skipped {:?}", share.skipped);
    Ok(())
}

fn activity_matrix() -> Outcome {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let authors: Vec<AuthorId> = (0..rng.random_range(5..60)).map(|i| AuthorId::new(format!("a{i}"))).collect();
        let pubs: Vec<Publication> = (0..rng.random_range(20..400))
            .map(|i| {
                let k = rng.random_range(1..4);
                let mut team: Vec<AuthorId> = authors.choose_multiple(&mut rng, k).cloned().collect();
                team.sort();
                publication(format!("p/{i}"), format!("t{i}"), rng.random_range(1995..=2021), team)
            })
            .collect();
        let reference_year = pubs.iter().filter_map(|p| p.year).max().expect("years");
        let index = ActivityIndex::build(&pubs);
        for mode in [DenominatorMode::WindowLocal, DenominatorMode::AllTime] {
            let Ok(matrix) = active_matrix(&index, &ACTIVITY_GRID, &ACTIVITY_GRID, reference_year, mode) else {
                return Err(format!("seed {seed}: matrix failed"));
            };
            for cell in &matrix {
                let from = reference_year - cell.window_years as i32 + 1;
                let mut numerator = 0;
                let mut denominator = 0;
                for a in &authors {
                    let years: Vec<i32> =
                        pubs.iter().filter(|p| p.author_ids.contains(a)).filter_map(|p| p.year).collect();
                    let inside = years.iter().filter(|&&y| y >= from && y <= reference_year).count();
                    let counted = match mode {
                        DenominatorMode::WindowLocal => inside > 0,
                        DenominatorMode::AllTime => years.iter().any(|&y| y <= reference_year),
                    };
                    denominator += usize::from(counted);
                    numerator += usize::from(inside >= cell.min_papers as usize);
                }
                ensure!(
                    (cell.numerator, cell.denominator) == (numerator, denominator)
                        && cell.fraction == numerator as f64 / denominator as f64,
                    "seed {seed} {mode:?} x={} y={}: {}/{} vs {numerator}/{denominator}",
                    cell.min_papers,
                    cell.window_years,
                    cell.numerator,
                    cell.denominator
                );
            }
            for y in ACTIVITY_GRID {
                let column: Vec<f64> = matrix.iter().filter(|c| c.window_years == y).map(|c| c.fraction).collect();
                ensure!(column.windows(2).all(|w| w[0] >= w[1]), "seed {seed}: not antitone at y={y}: {column:?}");
            }
        }
    }
    Ok(())
}

/// Least squares through the normal equations on `t = (x - center) / scale`,
/// solved by Gaussian elimination with partial pivoting.
fn normal_equations(points: &[(f64, f64)], center: f64, scale: f64) -> [f64; 4] {
    let mut m = [[0.0f64; 5]; 4];
    for &(x, y) in points {
        let t = (x - center) / scale;
        let row = [1.0, t, t * t, t * t * t];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] += row[i] * row[j];
            }
            m[i][4] += row[i] * y;
        }
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).expect("rows");
        m.swap(col, pivot);
        for r in 0..4 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..5 {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut c = [0.0; 4];
    for k in 0..4 {
        c[k] = m[k][4] / m[k][k] / scale.powi(k as i32);
    }
    c
}

fn cubic_fits() -> Outcome {
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = rng.random_range(1950..2010);
        let xs: Vec<f64> = (first..first + rng.random_range(4..40)).map(f64::from).collect();
        let center = xs.iter().sum::<f64>() / xs.len() as f64;
        let scale = xs.iter().map(|x| (x - center).abs()).fold(0.0, f64::max);
        let truth: [f64; 4] = [
            rng.random_range(-1e3..1e3),
            rng.random_range(-50.0..50.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-0.5..0.5),
        ];
        let eval = |c: &[f64; 4], x: f64| {
            let t = x - center;
            c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t
        };

        let exact: Vec<(f64, f64)> = xs.iter().map(|&x| (x, eval(&truth, x))).collect();
        let fit = cubic_fit(&exact).map_err(|e| e.to_string())?;
        ensure!((fit.center - center).abs() < 1e-12, "seed {seed}: center {}", fit.center);
        for k in 0..4 {
            let err = (fit.coefficients[k] - truth[k]).abs();
            ensure!(err <= 1e-6, "seed {seed}: exact coefficient {k} off by {err:e}");
        }

        let noisy: Vec<(f64, f64)> = exact.iter().map(|&(x, y)| (x, y + rng.random_range(-30.0..30.0))).collect();
        let fit = cubic_fit(&noisy).map_err(|e| e.to_string())?;
        let oracle = normal_equations(&noisy, center, scale);
        for k in 0..4 {
            let err = (fit.coefficients[k] - oracle[k]).abs();
            ensure!(err <= 1e-8 * oracle[k].abs().max(1.0), "seed {seed}: coefficient {k} differs from oracle by {err:e}");
        }

        let y_norm = noisy.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
        for k in 0..4 {
            let column: Vec<f64> = noisy.iter().map(|p| ((p.0 - center) / scale).powi(k)).collect();
            let col_norm = column.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = column.iter().zip(&noisy).map(|(c, &(x, y))| c * (y - fit.eval(x))).sum();
            ensure!(dot.abs() / (col_norm * y_norm) < 1e-6, "seed {seed}: residual not orthogonal to column {k}");
        }
    }
    Ok(())
}

fn next_release(rng: &mut ChaCha8Rng, old: &[SynthRecord], additions: &[SynthRecord]) -> Vec<SynthRecord> {
    let mut new = Vec::new();
    for r in old {
        match rng.random_range(0..10) {
            0 => {}
            1 => {
                let mut m = r.clone();
                m.mdate = "2022-03-01".into();
                m.title = format!("{} (Revised)", m.title);
                if rng.random_bool(0.5) && !m.authors.is_empty() {
                    m.authors.pop();
                    m.authors.push(format!("New Contributor {}", rng.random_range(0..5)));
                }
                new.push(m);
            }
            _ => new.push(r.clone()),
        }
    }
    let k = rng.random_range(0..8);
    let mut added: Vec<SynthRecord> = additions.choose_multiple(rng, k).cloned().collect();
    new.append(&mut added);
    new.shuffle(rng);
    new
}

fn scan<T: d3::store::StoreRecord>(store: &Store) -> Result<Vec<String>, String> {
    let mut lines: Vec<String> = store
        .read_all::<T>()
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable"))
        .collect();
    lines.sort();
    Ok(lines)
}

fn diff_correctness() -> Outcome {
    for seed in 0..50u64 {
        let cfg = SynthConfig { seed, publications: 60, authors: 40, ..Default::default() };
        let old = generate(&cfg).records;
        let additions: Vec<SynthRecord> = generate(&SynthConfig { seed: seed + 1000, ..cfg })
            .records
            .into_iter()
            .filter(|r| r.tag != "www")
            .map(|mut r| {
                r.key = format!("{}x", r.key);
                r
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let new = next_release(&mut rng, &old, &additions);
        let old_corpus = common::corpus_from_xml(&render_dump(&old));
        let new_corpus = common::corpus_from_xml(&render_dump(&new));

        let dir = tempdir();
        let mut updated = Store::create(&dir.path().join("updated")).map_err(|e| e.to_string())?;
        write_corpus(&mut updated, &old_corpus, 16).map_err(|e| e.to_string())?;
        let cs = diff_against_store(&updated, &new_corpus).map_err(|e| e.to_string())?;
        apply_changeset(&mut updated, &cs, &new_corpus, 16).map_err(|e| e.to_string())?;
        let mut fresh = Store::create(&dir.path().join("fresh")).map_err(|e| e.to_string())?;
        write_corpus(&mut fresh, &new_corpus, 16).map_err(|e| e.to_string())?;

        ensure!(scan::<Publication>(&updated)? == scan::<Publication>(&fresh)?, "seed {seed}: publications differ");
        ensure!(scan::<Author>(&updated)? == scan::<Author>(&fresh)?, "seed {seed}: authors differ");
        ensure!(scan::<Venue>(&updated)? == scan::<Venue>(&fresh)?, "seed {seed}: venues differ");
        updated.verify().map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(())
}

fn end_to_end() -> Outcome {
    let mini = common::fixture("mini");
    let runs: Vec<_> = [1usize, 8]
        .into_iter()
        .map(|w| {
            let dir = tempdir();
            let files = common::read_dir_files(&common::cli_pipeline(&mini, dir.path(), w));
            (w, files)
        })
        .collect();
    ensure!(runs[0].1 == runs[1].1, "reports differ between --workers 1 and --workers 8");
    let golden = common::read_dir_files(&mini.join("golden"));
    ensure!(golden.len() == 8, "{} golden files", golden.len());
    for (name, bytes) in &golden {
        ensure!(runs[0].1.get(name) == Some(bytes), "{name} differs from the golden file");
    }
    Ok(())
}
