//! Seeded synthetic corpora: a DBLP-style dump plus everything the later
//! stages consume (server schedule, extractor sidecar, gold labels and
//! external citation totals).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use d3_core::model::{AffiliationBlock, AffiliationFields, BibEntry, FullTextMetadata, PubType, PublicationId};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::harvest::sim::{Route, Schedule, ScriptedResponse};

/// One dump record before serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthRecord {
    /// Element name: `article`, `inproceedings`, `www`, ...
    pub tag: &'static str,
    pub key: String,
    pub mdate: String,
    pub publtype: Option<&'static str>,
    pub authors: Vec<String>,
    pub editors: Vec<String>,
    pub title: String,
    pub year: Option<i32>,
    pub venue_field: Option<(&'static str, String)>,
    pub pages: Option<String>,
    pub publisher: Option<String>,
    /// `(url, open_access)`.
    pub ee: Vec<(String, bool)>,
    pub url: Option<String>,
}

impl SynthRecord {
    fn new(tag: &'static str, key: String, mdate: String, title: String) -> Self {
        Self {
            tag,
            key,
            mdate,
            publtype: None,
            authors: Vec::new(),
            editors: Vec::new(),
            title,
            year: None,
            venue_field: None,
            pages: None,
            publisher: None,
            ee: Vec::new(),
            url: None,
        }
    }
}

/// Entities declared in the internal DTD subset of synthetic dumps.
pub const INTERNAL_SUBSET: &str = r#"<!ENTITY d3lab "Laboratory">
<!ENTITY oslash "&#248;">"#;

/// Characters written as named entities in synthetic dumps.
const NAMED: [(char, &str); 8] = [
    ('é', "eacute"),
    ('ü', "uuml"),
    ('ö', "ouml"),
    ('ñ', "ntilde"),
    ('ç', "ccedil"),
    ('á', "aacute"),
    ('í', "iacute"),
    ('ø', "oslash"),
];

/// XML text with markup characters escaped and the accented letters above
/// written as entity references.
pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => match NAMED.iter().find(|(ch, _)| *ch == c) {
                Some((_, name)) => {
                    let _ = write!(out, "&{name};");
                }
                None => out.push(c),
            },
        }
    }
    out
}

/// Serialize records as a dump document with an internal DTD subset.
pub fn render_dump(records: &[SynthRecord]) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(s, "<!DOCTYPE dblp SYSTEM \"dblp.dtd\" [\n{INTERNAL_SUBSET}\n]>");
    s.push_str("<dblp>\n");
    for r in records {
        let _ = write!(s, "<{} key=\"{}\" mdate=\"{}\"", r.tag, escape_text(&r.key), r.mdate);
        if let Some(p) = r.publtype {
            let _ = write!(s, " publtype=\"{p}\"");
        }
        s.push_str(">\n");
        for a in &r.authors {
            let _ = writeln!(s, "<author>{}</author>", escape_text(a));
        }
        for e in &r.editors {
            let _ = writeln!(s, "<editor>{}</editor>", escape_text(e));
        }
        let _ = writeln!(s, "<title>{}</title>", escape_text(&r.title).replace("&amp;d3lab;", "&d3lab;"));
        if let Some(p) = &r.pages {
            let _ = writeln!(s, "<pages>{p}</pages>");
        }
        if let Some(y) = r.year {
            let _ = writeln!(s, "<year>{y}</year>");
        }
        if let Some((tag, v)) = &r.venue_field {
            let _ = writeln!(s, "<{tag}>{}</{tag}>", escape_text(v));
        }
        if let Some(p) = &r.publisher {
            let _ = writeln!(s, "<publisher>{}</publisher>", escape_text(p));
        }
        for (u, oa) in &r.ee {
            if *oa {
                let _ = writeln!(s, "<ee type=\"oa\">{}</ee>", escape_text(u));
            } else {
                let _ = writeln!(s, "<ee>{}</ee>", escape_text(u));
            }
        }
        if let Some(u) = &r.url {
            let _ = writeln!(s, "<url>{}</url>", escape_text(u));
        }
        let _ = writeln!(s, "</{}>", r.tag);
    }
    s.push_str("</dblp>\n");
    s
}

const FIRST: [&str; 40] = [
    "Anna", "Ben", "Carla", "David", "Elena", "Farid", "Grace", "Hiro", "Ines", "Jonas", "Kavya", "Liam", "Maria",
    "Nikolai", "Olga", "Pedro", "Qiang", "Rosa", "Saif", "Tomas", "Uma", "Victor", "Wei", "Xenia", "Yusuf", "Zoe",
    "José", "Björn", "Ayşe", "Chloé", "Jürgen", "Núria", "François", "Søren", "Ramón", "Inés", "Mei", "Arjun",
    "Leila", "Omar",
];

const LAST: [&str; 40] = [
    "Abbott", "Bauer", "Castro", "Dubois", "Eriksen", "Fischer", "Garcia", "Hansen", "Ivanova", "Jensen", "Kumar",
    "Lopez", "Mohammad", "Nakamura", "Okafor", "Petrov", "Quinn", "Rossi", "Schmidt", "Tanaka", "Ueda", "Vargas",
    "Wang", "Xu", "Yilmaz", "Zhang", "Müller", "Peña", "Gonçalves", "Sánchez", "Jørgensen", "Öztürk", "Martín",
    "Li", "Chen", "Singh", "Haddad", "Kowalski", "Novak", "Silva",
];

const MIDDLE: [&str; 6] = ["M.", "J.", "K.", "A.", "L.", "R."];

const ADJ: [&str; 16] = [
    "Robust", "Efficient", "Multilingual", "Neural", "Unsupervised", "Interpretable", "Scalable", "Contrastive",
    "Low-Resource", "Probabilistic", "Hierarchical", "Adaptive", "Incremental", "Cross-Lingual", "Sparse", "Joint",
];

const NOUN: [&str; 16] = [
    "Models", "Representations", "Parsing", "Embeddings", "Alignment", "Generation", "Retrieval", "Tagging",
    "Classification", "Summarization", "Translation", "Annotation", "Inference", "Segmentation", "Clustering",
    "Evaluation",
];

const TASK: [&str; 16] = [
    "Named Entity Recognition", "Question Answering", "Sentiment Analysis", "Machine Translation",
    "Dependency Parsing", "Relation Extraction", "Text Simplification", "Dialogue Systems", "Coreference Resolution",
    "Emotion Detection", "Argument Mining", "Speech Recognition", "Semantic Role Labeling", "Fact Checking",
    "Information Extraction", "Scholarly Document Processing",
];

const EARLY_TERMS: [&str; 6] = ["statistical", "hidden", "markov", "phrase", "kernel", "rules"];
const LATE_TERMS: [&str; 6] = ["bert", "transformer", "pretrained", "attention", "prompt", "finetuning"];

const INSTITUTIONS: [(&str, &str, &str, &str, &str); 8] = [
    ("National Research Council Canada", "Canada", "Ottawa", "K1A 0R6", "1200 Montreal Road, Bldg. M-58"),
    ("University of Wuppertal", "Germany", "Wuppertal", "42119", "Gaußstraße 20"),
    ("University of Göttingen", "Germany", "Göttingen", "37073", "Platz der Göttinger Sieben 5"),
    ("Universitat Pompeu Fabra", "Spain", "Barcelona", "08018", "Roc Boronat 138"),
    ("Kyoto University", "Japan", "Kyoto", "606-8501", "Yoshida-honmachi"),
    ("University of Edinburgh", "United Kingdom", "Edinburgh", "EH8 9AB", "10 Crichton Street"),
    ("Indian Institute of Science", "India", "Bangalore", "560012", "CV Raman Road"),
    ("Allen Institute for AI", "USA", "Seattle", "98103", "2157 N Northlake Way"),
];

const CONFERENCES: [(&str, &str); 5] =
    [("acl", "ACL"), ("emnlp", "EMNLP"), ("naacl", "NAACL-HLT"), ("coling", "COLING"), ("lrec", "LREC")];
const JOURNALS: [(&str, &str); 3] = [("tacl", "Trans. Assoc. Comput. Linguistics"), ("coli", "Comput. Linguistics"), ("jair", "J. Artif. Intell. Res.")];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub publications: usize,
    pub authors: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Share of printed author names replaced by garbage in extracted metadata.
    pub corrupt_share: f64,
    /// Number of PDF links answering 429 (Retry-After: 1) once.
    pub throttled: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 2021,
            publications: 1000,
            authors: 420,
            first_year: 2000,
            last_year: 2021,
            corrupt_share: 0.03,
            throttled: 4,
        }
    }
}

/// Everything a synthetic corpus consists of.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<SynthRecord>,
    pub schedule: Schedule,
    /// Extractor output, metadata or rejection, one JSON value per document.
    pub sidecar: Vec<serde_json::Value>,
    /// Gold author labels, one JSON value per extracted publication.
    pub gold: Vec<serde_json::Value>,
    /// External incoming-citation totals for a subset of publications.
    pub lookup: BTreeMap<String, u64>,
    /// Publication count per type as generated.
    pub type_counts: BTreeMap<PubType, usize>,
}

fn jsonl(values: &[serde_json::Value]) -> String {
    let mut s = String::new();
    for v in values {
        s.push_str(&serde_json::to_string(v).expect("JSON values serialize"));
        s.push('\n');
    }
    s
}

impl SynthCorpus {
    pub fn dump_xml(&self) -> String {
        render_dump(&self.records)
    }

    pub fn sidecar_jsonl(&self) -> String {
        jsonl(&self.sidecar)
    }

    pub fn gold_jsonl(&self) -> String {
        jsonl(&self.gold)
    }

    /// Write `dump.xml`, `schedule.json`, `sidecar.jsonl`, `gold.jsonl` and
    /// `lookup.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("dump.xml"), self.dump_xml())?;
        let mut schedule = serde_json::to_string_pretty(&self.schedule).map_err(io::Error::other)?;
        schedule.push('\n');
        std::fs::write(dir.join("schedule.json"), schedule)?;
        std::fs::write(dir.join("sidecar.jsonl"), self.sidecar_jsonl())?;
        std::fs::write(dir.join("gold.jsonl"), self.gold_jsonl())?;
        let mut lookup = serde_json::to_string_pretty(&self.lookup).map_err(io::Error::other)?;
        lookup.push('\n');
        std::fs::write(dir.join("lookup.json"), lookup)
    }
}

/// Type mix of a corpus of `n` publications, roughly DBLP's, every type
/// present once `n >= 50`.
#[allow(clippy::approx_constant)]
pub fn type_mix(n: usize) -> Vec<(PubType, usize)> {
    let shares = [
        (PubType::InProceedings, 0.4712),
        (PubType::Article, 0.4342),
        (PubType::Informal, 0.0605),
        (PubType::PhdThesis, 0.0128),
        (PubType::InCollection, 0.0105),
        (PubType::Proceedings, 0.0077),
        (PubType::Book, 0.0030),
    ];
    let mut counts: Vec<(PubType, usize)> =
        shares.iter().map(|&(t, s)| (t, ((n as f64 * s).floor() as usize).max(usize::from(n >= 50)))).collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    if assigned <= n {
        counts[0].1 += n - assigned;
    } else {
        counts[0].1 -= assigned - n;
    }
    counts
}

fn strip_diacritics(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            'é' | 'è' => 'e',
            'ü' => 'u',
            'ö' | 'ø' => 'o',
            'ñ' => 'n',
            'ç' => 'c',
            'á' => 'a',
            'í' => 'i',
            'ş' => 's',
            'Ö' => 'O',
            'ß' => 's',
            other => other,
        })
        .collect()
}

/// A mild printing variant the matcher should still accept.
fn printed_variant(rng: &mut ChaCha8Rng, name: &str) -> String {
    let base = name.trim_end_matches(|c: char| c.is_ascii_digit() || c == ' ').to_string();
    match rng.random_range(0..10) {
        0..=5 => base,
        6 | 7 => strip_diacritics(&base),
        8 => {
            let parts: Vec<&str> = base.split(' ').collect();
            if parts.len() == 3 {
                format!("{} {}", parts[0], parts[2])
            } else {
                base.to_uppercase()
            }
        }
        _ => base.to_uppercase(),
    }
}

/// Garbage standing in for a badly extracted name; far from any real one.
fn corrupted_name(rng: &mut ChaCha8Rng) -> String {
    const SYL: [&str; 8] = ["qx", "zv", "wk", "jh", "xy", "vq", "kz", "pw"];
    let mut s = String::new();
    for _ in 0..rng.random_range(3..5) {
        s.push_str(SYL.choose(rng).expect("non-empty"));
    }
    format!("{} {}", s[..2].to_uppercase(), s)
}

fn typo(rng: &mut ChaCha8Rng, title: &str) -> String {
    match rng.random_range(0..4) {
        0 => title.to_lowercase(),
        1 => {
            let chars: Vec<char> = title.chars().collect();
            let i = rng.random_range(0..chars.len());
            chars.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| *c).collect()
        }
        _ => title.to_string(),
    }
}

struct Paper {
    id: String,
    title: String,
    year: i32,
    authors: Vec<usize>,
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut names: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    while names.len() < cfg.authors {
        let first = *FIRST.choose(&mut rng).expect("non-empty");
        let last = *LAST.choose(&mut rng).expect("non-empty");
        let name = if rng.random_bool(0.25) {
            format!("{first} {} {last}", MIDDLE.choose(&mut rng).expect("non-empty"))
        } else {
            format!("{first} {last}")
        };
        if seen.insert(name.clone()) {
            names.push(name);
        } else if !seen.contains(&format!("{name} 0001")) {
            // DBLP-style homonyms: the bare name becomes the first person.
            for n in [format!("{name} 0001"), format!("{name} 0002")] {
                if names.len() < cfg.authors && seen.insert(n.clone()) {
                    names.push(n);
                }
            }
        }
    }
    let weights: Vec<f64> = (0..names.len()).map(|r| 1.0 / (r as f64 + 1.0).powf(0.9)).collect();
    let dist = rand::distr::weighted::WeightedIndex::new(&weights).expect("positive weights");
    let affiliation_of: Vec<usize> = (0..names.len()).map(|_| rng.random_range(0..INSTITUTIONS.len())).collect();

    let mut types: Vec<PubType> = type_mix(cfg.publications).into_iter().flat_map(|(t, n)| std::iter::repeat_n(t, n)).collect();
    types.shuffle(&mut rng);
    let mut type_counts = BTreeMap::new();

    let mut records = Vec::new();
    let mut papers: Vec<Paper> = Vec::new();
    let mut keys = BTreeSet::new();
    let mut titles = BTreeSet::new();
    let span = (cfg.last_year - cfg.first_year + 1) as f64;
    for (i, t) in types.iter().enumerate() {
        *type_counts.entry(*t).or_insert(0) += 1;
        // Later years are busier.
        let u: f64 = rng.random();
        let year = cfg.first_year + ((u.sqrt() * span).floor() as i32).min(cfg.last_year - cfg.first_year);
        let yy = year % 100;
        let n_auth = match t {
            PubType::PhdThesis | PubType::Book => 1,
            PubType::Proceedings => 0,
            _ => 1 + (rng.random_range(0..100) * rng.random_range(0..100)) / 1500 + usize::from(year > 2010),
        };
        let mut authors: Vec<usize> = Vec::new();
        while authors.len() < n_auth {
            let a = rng.sample(&dist);
            if !authors.contains(&a) {
                authors.push(a);
            }
        }
        let lead = authors.first().map_or("Editors", |&a| {
            names[a].split(' ').rfind(|w| !w.starts_with(|c: char| c.is_ascii_digit())).unwrap_or("X")
        });
        let lead: String = strip_diacritics(lead).chars().filter(char::is_ascii_alphabetic).collect();
        let mut title = loop {
            let era: &[&str] = if year >= 2018 { &LATE_TERMS } else { &EARLY_TERMS };
            let candidate = format!(
                "{} {} {} for {}",
                ADJ.choose(&mut rng).expect("non-empty"),
                capitalize(era.choose(&mut rng).expect("non-empty")),
                NOUN.choose(&mut rng).expect("non-empty"),
                TASK.choose(&mut rng).expect("non-empty"),
            );
            if titles.insert(candidate.clone()) {
                break candidate;
            }
        };
        let (tag, base_key, publtype, venue_field) = match t {
            PubType::InProceedings => {
                let (code, name) = CONFERENCES.choose(&mut rng).expect("non-empty");
                ("inproceedings", format!("conf/{code}/{lead}{yy:02}"), None, Some(("booktitle", name.to_string())))
            }
            PubType::Article => {
                let (code, name) = JOURNALS.choose(&mut rng).expect("non-empty");
                ("article", format!("journals/{code}/{lead}{yy:02}"), None, Some(("journal", name.to_string())))
            }
            PubType::Informal => (
                "article",
                format!("journals/corr/abs-{yy:02}{:02}-{:05}", rng.random_range(1..13), i),
                Some("informal"),
                Some(("journal", "CoRR".to_string())),
            ),
            PubType::PhdThesis => ("phdthesis", format!("phd/{lead}{yy:02}"), None, None),
            PubType::InCollection => ("incollection", format!("books/sp/{yy:02}/{lead}{yy:02}"), None, None),
            PubType::Proceedings => {
                let (code, name) = CONFERENCES.choose(&mut rng).expect("non-empty");
                title = format!("Proceedings of {name} {year}, Volume {}", i % 7 + 1);
                ("proceedings", format!("conf/{code}/{year}-{}", i % 97), None, Some(("booktitle", name.to_string())))
            }
            PubType::Book => ("book", format!("books/daglib/{lead}{yy:02}"), None, None),
        };
        let mut key = base_key.clone();
        let mut suffix = b'a';
        while !keys.insert(key.clone()) {
            key = format!("{base_key}{}", suffix as char);
            suffix += 1;
        }
        let mdate = format!("{}-{:02}-{:02}", rng.random_range(2016..2022), rng.random_range(1..13), rng.random_range(1..29));
        let mut r = SynthRecord::new(tag, key.clone(), mdate, title.clone());
        r.publtype = publtype;
        r.year = Some(year);
        r.venue_field = venue_field;
        if *t == PubType::Proceedings {
            r.editors = (0..2).map(|_| names[rng.sample(&dist)].clone()).collect();
            r.editors.dedup();
        } else {
            r.authors = authors.iter().map(|&a| names[a].clone()).collect();
        }
        if matches!(t, PubType::InProceedings | PubType::Article) {
            let first = rng.random_range(1..400);
            r.pages = Some(format!("{first}-{}", first + rng.random_range(4..15)));
        }
        if rng.random_bool(0.6) {
            r.publisher = Some(if matches!(t, PubType::InCollection | PubType::Book) { "Springer" } else { "ACL" }.into());
        }
        r.url = Some(format!("db/{}.html", key.rsplit_once('/').map_or(key.as_str(), |(h, _)| h)));
        records.push(r);
        papers.push(Paper { id: key, title, year, authors });
    }

    let mut routes: Vec<Route> = Vec::new();
    let mut sidecar = Vec::new();
    let mut gold = Vec::new();
    let mut planted_in: BTreeMap<usize, u64> = BTreeMap::new();
    let mut throttled = 0;
    let pdf = |body: String| ScriptedResponse {
        status: 200,
        delay_ms: 0,
        headers: BTreeMap::from([("Content-Type".to_string(), "application/pdf".to_string())]),
        body,
    };
    // Publications ordered by year, so that bibliographies cite earlier work.
    let mut by_year: Vec<usize> = (0..papers.len()).collect();
    by_year.sort_by_key(|&i| (papers[i].year, papers[i].id.clone()));

    for (i, r) in records.iter_mut().enumerate() {
        let p = &papers[i];
        let domain = format!("https://pdf{}.example", i % 4 + 1);
        let pdf_url = format!("{domain}/papers/{i:05}.pdf");
        let doi = format!("https://doi.org/10.5555/d3.{i:05}");
        let roll = rng.random_range(0..100);
        // 0-59 direct PDF, 60-74 landing page, 75-79 DOI only, 80-84 corrupted,
        // 85-89 no links, 90-99 dead link.
        let extracted = match roll {
            0..=59 => {
                r.ee = vec![(pdf_url.clone(), true), (doi.clone(), false)];
                let mut responses = Vec::new();
                if throttled < cfg.throttled {
                    throttled += 1;
                    responses.push(ScriptedResponse {
                        status: 429,
                        delay_ms: 0,
                        headers: BTreeMap::from([("Retry-After".to_string(), "1".to_string())]),
                        body: String::new(),
                    });
                }
                responses.push(pdf(format!("%PDF-1.5 {i}")));
                routes.push(Route { url: pdf_url, responses });
                true
            }
            60..=74 => {
                let landing = format!("https://landing.example/paper/{i:05}");
                r.ee = vec![(landing.clone(), false)];
                routes.push(Route {
                    url: landing,
                    responses: vec![ScriptedResponse {
                        status: 200,
                        delay_ms: 0,
                        headers: BTreeMap::from([("Content-Type".to_string(), "text/html".to_string())]),
                        body: format!("<html><a href=\"/files/{i:05}.pdf\">PDF</a></html>"),
                    }],
                });
                routes.push(Route {
                    url: format!("https://landing.example/files/{i:05}.pdf"),
                    responses: vec![pdf(format!("%PDF-1.4 {i}"))],
                });
                true
            }
            75..=79 => {
                r.ee = vec![(doi, false)];
                false
            }
            80..=84 => {
                r.ee = vec![(pdf_url.clone(), true)];
                if roll % 2 == 0 {
                    // Served as PDF but not one.
                    routes.push(Route { url: pdf_url, responses: vec![pdf(format!("<html>moved {i}</html>"))] });
                } else {
                    routes.push(Route { url: pdf_url, responses: vec![pdf(format!("%PDF-1.3 broken {i}"))] });
                    sidecar.push(json!({"id": p.id, "rejected": "corrupted PDF"}));
                }
                false
            }
            85..=89 => {
                r.ee.clear();
                false
            }
            _ => {
                r.ee = vec![(format!("{domain}/gone/{i:05}.pdf"), false)];
                false
            }
        };
        if !extracted {
            continue;
        }

        let mut blocks = Vec::new();
        let mut gold_names = BTreeMap::new();
        for &a in &p.authors {
            let printed = if rng.random_bool(cfg.corrupt_share) {
                corrupted_name(&mut rng)
            } else {
                printed_variant(&mut rng, &names[a])
            };
            let (name, country, city, postcode, addressline) = INSTITUTIONS[affiliation_of[a]];
            blocks.push(AffiliationBlock {
                author: printed.clone(),
                affiliation: AffiliationFields {
                    name: name.into(),
                    country: Some(country.into()),
                    city: Some(city.into()),
                    postcode: Some(postcode.into()),
                    addressline: Some(addressline.into()),
                },
            });
            gold_names.insert(printed, names[a].clone());
        }
        if gold_names.len() == p.authors.len() && !p.authors.is_empty() {
            gold.push(json!({"id": p.id, "names": gold_names}));
        }

        let earlier: Vec<usize> = by_year.iter().copied().filter(|&j| papers[j].year < p.year && j != i).collect();
        let mut bib = Vec::new();
        if !earlier.is_empty() {
            let k = rng.random_range(2..10).min(earlier.len());
            for &j in earlier.choose_multiple(&mut rng, k) {
                bib.push(BibEntry { title: typo(&mut rng, &papers[j].title), authors: vec![], year: Some(papers[j].year) });
                *planted_in.entry(j).or_default() += 1;
            }
        }
        for e in 0..rng.random_range(1..4) {
            bib.push(BibEntry {
                title: format!("An External Study of {} Number {}", TASK.choose(&mut rng).expect("non-empty"), i * 10 + e),
                authors: vec!["Somebody Else".into()],
                year: Some(p.year - 1),
            });
        }
        let era: &[&str] = if p.year >= 2018 { &LATE_TERMS } else { &EARLY_TERMS };
        let abstract_text = format!(
            "We study {} with {} {} methods. Our {} approach improves {} on three benchmarks, and the {} analysis shows where {} models fail.",
            p.title.to_lowercase().split(" for ").nth(1).unwrap_or("language"),
            era.choose(&mut rng).expect("non-empty"),
            NOUN.choose(&mut rng).expect("non-empty").to_lowercase(),
            era.choose(&mut rng).expect("non-empty"),
            TASK.choose(&mut rng).expect("non-empty").to_lowercase(),
            ADJ.choose(&mut rng).expect("non-empty").to_lowercase(),
            era.choose(&mut rng).expect("non-empty"),
        );
        let meta = FullTextMetadata {
            publication_id: PublicationId::new(p.id.clone()),
            ocr_title: Some(if rng.random_bool(0.2) { p.title.to_uppercase() } else { p.title.clone() }),
            ocr_abstract: Some(abstract_text),
            keywords: vec![era.choose(&mut rng).expect("non-empty").to_string()],
            affiliations: blocks,
            bib_entries: bib,
        };
        sidecar.push(serde_json::to_value(meta).expect("plain struct"));
    }

    let mut lookup = BTreeMap::new();
    for (i, p) in papers.iter().enumerate() {
        if rng.random_bool(0.8) {
            let inside = planted_in.get(&i).copied().unwrap_or(0);
            lookup.insert(p.id.clone(), inside + rng.random_range(0..(inside + 3)));
        }
    }

    // Author homepages and records the pipeline skips.
    for (n, name) in names.iter().enumerate().filter(|(n, _)| n % 25 == 0) {
        let mut r = SynthRecord::new("www", format!("homepages/{n:02}/{n}"), "2020-01-01".into(), "Home Page".into());
        r.authors = vec![name.clone()];
        r.url = Some(format!("https://people.example/~{n}"));
        r.ee.clear();
        records.push(r);
    }
    let mut m = SynthRecord::new("mastersthesis", "ms/Skipped20".into(), "2020-02-02".into(), "A Thesis the &d3lab; Keeps".into());
    m.authors = vec![names[0].clone()];
    m.year = Some(2020);
    records.push(m);

    sidecar.sort_by(|a, b| a["id"].as_str().cmp(&b["id"].as_str()));
    gold.sort_by(|a, b| a["id"].as_str().cmp(&b["id"].as_str()));
    routes.sort_by(|a, b| a.url.cmp(&b.url));
    SynthCorpus {
        records,
        schedule: Schedule { default: ScriptedResponse::status(404), routes },
        sidecar,
        gold,
        lookup,
        type_counts,
    }
}

/// Audit fixture: `publications` papers with `names` authors each, exactly
/// `corrupted` of whose printed names are garbage. Every paper has a direct
/// PDF link and extracted metadata, and gold labels for all names.
pub fn planted(seed: u64, publications: usize, names: usize, corrupted: usize) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<String> = FIRST.iter().flat_map(|f| LAST.iter().map(move |l| format!("{f} {l}"))).collect();
    pool.shuffle(&mut rng);
    let mut records = Vec::new();
    let mut routes = Vec::new();
    let mut sidecar = Vec::new();
    let mut gold = Vec::new();
    for i in 0..publications {
        let year = 2010 + (i % 12) as i32;
        let key = format!("conf/acl/Planted{i:04}");
        let mut r = SynthRecord::new("inproceedings", key.clone(), "2021-01-01".into(), format!("Planted Study Number {i}"));
        r.year = Some(year);
        r.venue_field = Some(("booktitle", "ACL".into()));
        let authors: Vec<String> = pool.choose_multiple(&mut rng, names).cloned().collect();
        r.authors = authors.clone();
        let url = format!("https://pdf{}.example/planted/{i:04}.pdf", i % 4 + 1);
        r.ee = vec![(url.clone(), true)];
        routes.push(Route {
            url,
            responses: vec![ScriptedResponse {
                status: 200,
                delay_ms: 0,
                headers: BTreeMap::from([("Content-Type".to_string(), "application/pdf".to_string())]),
                body: format!("%PDF-1.5 {i}"),
            }],
        });
        let mut bad: Vec<usize> = (0..names).collect();
        bad.shuffle(&mut rng);
        bad.truncate(corrupted);
        let mut blocks = Vec::new();
        let mut labels = BTreeMap::new();
        for (j, a) in authors.iter().enumerate() {
            let printed = if bad.contains(&j) { format!("{} {j}", corrupted_name(&mut rng)) } else { a.clone() };
            labels.insert(printed.clone(), a.clone());
            blocks.push(AffiliationBlock {
                author: printed,
                affiliation: AffiliationFields { name: INSTITUTIONS[j % INSTITUTIONS.len()].0.into(), ..Default::default() },
            });
        }
        gold.push(json!({"id": key, "names": labels}));
        let meta = FullTextMetadata {
            publication_id: PublicationId::new(key),
            affiliations: blocks,
            ..Default::default()
        };
        sidecar.push(serde_json::to_value(meta).expect("plain struct"));
        records.push(r);
    }
    SynthCorpus {
        records,
        schedule: Schedule { default: ScriptedResponse::status(404), routes },
        sidecar,
        gold,
        lookup: BTreeMap::new(),
        type_counts: BTreeMap::from([(PubType::InProceedings, publications)]),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
