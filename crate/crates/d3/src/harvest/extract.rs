use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::time::Duration;

use d3_core::model::{AffiliationBlock, AffiliationFields, BibEntry, FullTextMetadata, PublicationId};
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::Deserialize;

use super::fetch::looks_like_pdf;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("extractor unavailable: {0}")]
    ExtractorUnavailable(String),
    #[error("extraction rejected: {0}")]
    ExtractionRejected(String),
}

/// Turns full-text bytes into structured metadata.
pub trait Extractor: Send + Sync {
    fn extract(&self, id: &PublicationId, pdf: &[u8]) -> Result<FullTextMetadata, ExtractError>;
}

#[derive(Debug, Clone)]
enum SidecarEntry {
    Metadata(FullTextMetadata),
    Rejected(String),
}

#[derive(Deserialize)]
struct RejectedLine {
    id: PublicationId,
    rejected: String,
}

/// Replays pre-recorded extractor output keyed by publication id. One JSON
/// object per line: either a metadata record, or `{"id": ..., "rejected":
/// reason}` for documents the extractor turns down.
#[derive(Debug, Clone, Default)]
pub struct SidecarExtractor {
    entries: HashMap<PublicationId, SidecarEntry>,
}

impl SidecarExtractor {
    pub fn from_reader<R: BufRead>(reader: R) -> std::io::Result<Self> {
        let mut entries = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: serde_json::Error| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("sidecar line {}: {e}", n + 1))
            };
            let value: serde_json::Value = serde_json::from_str(&line).map_err(bad)?;
            if value.get("rejected").is_some() {
                let r: RejectedLine = serde_json::from_value(value).map_err(bad)?;
                entries.insert(r.id, SidecarEntry::Rejected(r.rejected));
            } else {
                let m: FullTextMetadata = serde_json::from_value(value).map_err(bad)?;
                entries.insert(m.publication_id.clone(), SidecarEntry::Metadata(m));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Extractor for SidecarExtractor {
    fn extract(&self, id: &PublicationId, pdf: &[u8]) -> Result<FullTextMetadata, ExtractError> {
        if !looks_like_pdf(pdf) {
            return Err(ExtractError::ExtractionRejected("input is not a PDF".into()));
        }
        match self.entries.get(id) {
            Some(SidecarEntry::Metadata(m)) => Ok(m.clone()),
            Some(SidecarEntry::Rejected(reason)) => Err(ExtractError::ExtractionRejected(reason.clone())),
            None => Err(ExtractError::ExtractionRejected(format!("no recorded output for {id}"))),
        }
    }
}

/// Client for a GROBID-compatible service
/// (`POST {endpoint}/api/processFulltextDocument`, TEI XML response).
#[derive(Debug, Clone)]
pub struct GrobidExtractor {
    endpoint: String,
    timeout: Duration,
}

impl GrobidExtractor {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        Self { endpoint: endpoint.trim_end_matches('/').to_string(), timeout }
    }
}

impl Extractor for GrobidExtractor {
    fn extract(&self, id: &PublicationId, pdf: &[u8]) -> Result<FullTextMetadata, ExtractError> {
        let unavailable = |e: reqwest::Error| ExtractError::ExtractorUnavailable(e.to_string());
        let client = reqwest::blocking::Client::builder().timeout(self.timeout).build().map_err(unavailable)?;
        let part = reqwest::blocking::multipart::Part::bytes(pdf.to_vec())
            .file_name("document.pdf")
            .mime_str("application/pdf")
            .map_err(unavailable)?;
        let form = reqwest::blocking::multipart::Form::new().part("input", part).text("includeRawAffiliations", "1");
        let resp = client
            .post(format!("{}/api/processFulltextDocument", self.endpoint))
            .multipart(form)
            .send()
            .map_err(unavailable)?;
        let status = resp.status();
        if status.as_u16() == 204 || status.is_client_error() {
            return Err(ExtractError::ExtractionRejected(format!("service answered {status}")));
        }
        if !status.is_success() {
            return Err(ExtractError::ExtractorUnavailable(format!("service answered {status}")));
        }
        let tei = resp.text().map_err(unavailable)?;
        parse_tei(id, &tei).map_err(ExtractError::ExtractionRejected)
    }
}

#[derive(Debug, Default)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    text: String,
}

impl Node {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    fn child(&self, name: &str) -> Option<&Node> {
        self.children.iter().find(|c| c.name == name)
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    fn path(&self, path: &[&str]) -> Option<&Node> {
        path.iter().try_fold(self, |n, p| n.child(p))
    }

    fn descendants<'a>(&'a self, name: &str, out: &mut Vec<&'a Node>) {
        for c in &self.children {
            if c.name == name {
                out.push(c);
            }
            c.descendants(name, out);
        }
    }

    fn all_text(&self) -> String {
        let mut s = self.text.clone();
        for c in &self.children {
            s.push(' ');
            s.push_str(&c.all_text());
        }
        s
    }

    fn clean_text(&self) -> String {
        self.all_text().split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

fn local(name: &[u8]) -> String {
    let s = String::from_utf8_lossy(name);
    s.rsplit(':').next().unwrap_or("").to_string()
}

fn parse_tree(xml: &str) -> Result<Node, String> {
    let mut reader = Reader::from_str(xml);
    let mut stack: Vec<Node> = vec![Node::default()];
    let attrs_of = |e: &quick_xml::events::BytesStart| -> Vec<(String, String)> {
        e.attributes()
            .flatten()
            .map(|a| (local(a.key.as_ref()), a.unescape_value().map(|v| v.into_owned()).unwrap_or_default()))
            .collect()
    };
    loop {
        match reader.read_event().map_err(|e| e.to_string())? {
            Event::Start(e) => stack.push(Node { name: local(e.name().as_ref()), attrs: attrs_of(&e), ..Node::default() }),
            Event::Empty(e) => {
                let node = Node { name: local(e.name().as_ref()), attrs: attrs_of(&e), ..Node::default() };
                stack.last_mut().ok_or("unbalanced document")?.children.push(node);
            }
            Event::End(_) => {
                let node = stack.pop().ok_or("unbalanced document")?;
                stack.last_mut().ok_or("unbalanced document")?.children.push(node);
            }
            Event::Text(t) => {
                let s = t.decode().map_err(|e| e.to_string())?;
                if let Some(n) = stack.last_mut() {
                    n.text.push_str(&s);
                }
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref().map_err(|e| e.to_string())? {
                    Some(c) => c.to_string(),
                    None => {
                        let name = r.decode().map_err(|e| e.to_string())?;
                        quick_xml::escape::resolve_predefined_entity(&name).unwrap_or("").to_string()
                    }
                };
                if let Some(n) = stack.last_mut() {
                    n.text.push_str(&resolved);
                }
            }
            Event::CData(c) => {
                if let Some(n) = stack.last_mut() {
                    n.text.push_str(&String::from_utf8_lossy(&c));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced document".into());
    }
    let mut root = stack.pop().expect("root");
    root.children.pop().ok_or_else(|| "empty document".to_string())
}

fn person_name(author: &Node) -> Option<String> {
    let pers = author.child("persName")?;
    let mut parts: Vec<String> = pers.children_named("forename").map(Node::clean_text).collect();
    parts.extend(pers.children_named("surname").map(Node::clean_text));
    let name = parts.into_iter().filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" ");
    (!name.is_empty()).then_some(name)
}

fn affiliation_fields(aff: &Node) -> Option<AffiliationFields> {
    let orgs: Vec<&Node> = aff.children_named("orgName").collect();
    let name = orgs
        .iter()
        .find(|o| o.attr("type") == Some("institution"))
        .or_else(|| orgs.first())
        .map(|o| o.clean_text())
        .filter(|n| !n.is_empty())?;
    let address = aff.child("address");
    let field = |n: &str| address.and_then(|a| a.child(n)).map(Node::clean_text).filter(|s| !s.is_empty());
    Some(AffiliationFields {
        name,
        country: field("country"),
        city: field("settlement"),
        postcode: field("postCode"),
        addressline: field("addrLine"),
    })
}

fn bib_entry(bibl: &Node) -> Option<BibEntry> {
    let analytic = bibl.child("analytic");
    let monogr = bibl.child("monogr");
    let title = analytic
        .and_then(|a| a.child("title"))
        .or_else(|| monogr.and_then(|m| m.child("title")))
        .map(Node::clean_text)
        .filter(|t| !t.is_empty())?;
    let holder = analytic.filter(|a| a.child("author").is_some()).or(monogr);
    let authors = holder.map_or_else(Vec::new, |h| h.children_named("author").filter_map(person_name).collect());
    let year = monogr
        .and_then(|m| m.path(&["imprint", "date"]))
        .and_then(|d| d.attr("when"))
        .and_then(|w| w.get(..4))
        .and_then(|y| y.parse().ok());
    Some(BibEntry { title, authors, year })
}

/// Map a TEI document as produced by GROBID onto [`FullTextMetadata`].
pub fn parse_tei(id: &PublicationId, tei: &str) -> Result<FullTextMetadata, String> {
    let root = parse_tree(tei)?;
    if root.name != "TEI" {
        return Err(format!("unexpected root element {}", root.name));
    }
    let header = root.child("teiHeader").ok_or("missing teiHeader")?;
    let ocr_title = header
        .path(&["fileDesc", "titleStmt", "title"])
        .map(Node::clean_text)
        .filter(|t| !t.is_empty());
    let profile = header.child("profileDesc");
    let ocr_abstract = profile.and_then(|p| p.child("abstract")).map(Node::clean_text).filter(|t| !t.is_empty());
    let keywords = profile
        .and_then(|p| p.path(&["textClass", "keywords"]))
        .map(|k| k.children_named("term").map(Node::clean_text).filter(|t| !t.is_empty()).collect())
        .unwrap_or_default();

    let mut affiliations = Vec::new();
    if let Some(analytic) = header.path(&["fileDesc", "sourceDesc", "biblStruct", "analytic"]) {
        for author in analytic.children_named("author") {
            let Some(name) = person_name(author) else { continue };
            for aff in author.children_named("affiliation") {
                if let Some(fields) = affiliation_fields(aff) {
                    affiliations.push(AffiliationBlock { author: name.clone(), affiliation: fields });
                }
            }
        }
    }

    let mut bibls = Vec::new();
    if let Some(back) = root.path(&["text", "back"]) {
        let mut lists = Vec::new();
        back.descendants("listBibl", &mut lists);
        for list in lists {
            bibls.extend(list.children_named("biblStruct").filter_map(bib_entry));
        }
    }

    Ok(FullTextMetadata {
        publication_id: id.clone(),
        ocr_title,
        ocr_abstract,
        keywords,
        affiliations,
        bib_entries: bibls,
    })
}
