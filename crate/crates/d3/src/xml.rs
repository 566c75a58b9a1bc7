//! Streaming reader for DBLP-style XML dumps.
//!
//! Records are yielded one at a time; memory use is bounded by the largest
//! record. Named entities are resolved from the XML predefined set, the
//! ISO-8859-1 HTML set, an optional external DTD and the document's internal
//! subset.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::LazyLock;

use d3_core::model::{ElementKind, RawField, RawRecord};
use d3_core::Date;
use flate2::read::MultiGzDecoder;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use regex::Regex;

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("malformed XML at byte {position}: {message}")]
    MalformedXml { position: u64, message: String },
    #[error("unknown entity &{0};")]
    UnknownEntity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const XML_PREDEFINED: [(&str, &str); 5] =
    [("lt", "<"), ("gt", ">"), ("amp", "&"), ("apos", "'"), ("quot", "\"")];

// Names of the ISO-8859-1 entities for code points 160..=255.
const LATIN1_NAMES: [&str; 96] = [
    "nbsp", "iexcl", "cent", "pound", "curren", "yen", "brvbar", "sect", "uml", "copy", "ordf", "laquo", "not", "shy",
    "reg", "macr", "deg", "plusmn", "sup2", "sup3", "acute", "micro", "para", "middot", "cedil", "sup1", "ordm",
    "raquo", "frac14", "frac12", "frac34", "iquest", "Agrave", "Aacute", "Acirc", "Atilde", "Auml", "Aring", "AElig",
    "Ccedil", "Egrave", "Eacute", "Ecirc", "Euml", "Igrave", "Iacute", "Icirc", "Iuml", "ETH", "Ntilde", "Ograve",
    "Oacute", "Ocirc", "Otilde", "Ouml", "times", "Oslash", "Ugrave", "Uacute", "Ucirc", "Uuml", "Yacute", "THORN",
    "szlig", "agrave", "aacute", "acirc", "atilde", "auml", "aring", "aelig", "ccedil", "egrave", "eacute", "ecirc",
    "euml", "igrave", "iacute", "icirc", "iuml", "eth", "ntilde", "ograve", "oacute", "ocirc", "otilde", "ouml",
    "divide", "oslash", "ugrave", "uacute", "ucirc", "uuml", "yacute", "thorn", "yuml",
];

static ENTITY_DECL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"<!ENTITY\s+([A-Za-z_:][\w.:-]*)\s+(?:"([^"]*)"|'([^']*)')\s*>"#).unwrap());
static CHAR_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"&#(x[0-9A-Fa-f]+|[0-9]+);").unwrap());

#[derive(Debug, Clone)]
pub struct EntityTable {
    map: HashMap<String, String>,
}

impl Default for EntityTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl EntityTable {
    pub fn builtin() -> Self {
        let mut map: HashMap<String, String> =
            XML_PREDEFINED.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (i, name) in LATIN1_NAMES.iter().enumerate() {
            let c = char::from_u32(160 + i as u32).expect("latin-1 code point");
            map.insert(name.to_string(), c.to_string());
        }
        Self { map }
    }

    /// XML predefined entities only.
    pub fn strict() -> Self {
        Self { map: XML_PREDEFINED.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    /// Add every `<!ENTITY name "value">` declaration found in `text`.
    /// Character references inside values are expanded; later declarations
    /// do not override earlier ones.
    pub fn add_declarations(&mut self, text: &str) {
        for cap in ENTITY_DECL.captures_iter(text) {
            let name = &cap[1];
            let raw = cap.get(2).or(cap.get(3)).map_or("", |m| m.as_str());
            let value = expand_char_refs(raw);
            self.map.entry(name.to_string()).or_insert(value);
        }
    }

    pub fn load_dtd(&mut self, path: &Path) -> std::io::Result<()> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        self.add_declarations(&text);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.map.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn expand_char_refs(raw: &str) -> String {
    CHAR_REF
        .replace_all(raw, |c: &regex::Captures| {
            let digits = &c[1];
            let code = match digits.strip_prefix('x') {
                Some(hex) => u32::from_str_radix(hex, 16).ok(),
                None => digits.parse().ok(),
            };
            code.and_then(char::from_u32).map_or_else(|| c[0].to_string(), |ch| ch.to_string())
        })
        .into_owned()
}

/// Open a dump file, transparently decompressing gzip input.
pub fn open_dump(path: &Path) -> std::io::Result<Box<dyn BufRead + Send>> {
    let mut reader = BufReader::with_capacity(1 << 16, File::open(path)?);
    let gz = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    Ok(if gz { Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(reader))) } else { Box::new(reader) })
}

struct PendingRecord {
    kind: ElementKind,
    attributes: Vec<(String, String)>,
    fields: Vec<RawField>,
    field: Option<RawField>,
    // Nesting depth of inline markup inside the current field.
    inline_depth: usize,
}

/// Iterator over the records of a dump.
pub struct DumpReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    entities: EntityTable,
    depth: usize,
    finished: bool,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(input: R, entities: EntityTable) -> Self {
        let mut reader = Reader::from_reader(input);
        let config = reader.config_mut();
        config.check_end_names = true;
        config.expand_empty_elements = false;
        Self { reader, buf: Vec::with_capacity(4096), entities, depth: 0, finished: false }
    }

    pub fn entities(&self) -> &EntityTable {
        &self.entities
    }

    fn malformed(&self, message: impl Into<String>) -> ParseError {
        ParseError::MalformedXml { position: self.reader.buffer_position(), message: message.into() }
    }

    fn xml_error(&self, e: quick_xml::Error) -> ParseError {
        match e {
            quick_xml::Error::Io(io) => ParseError::Io(std::io::Error::new(io.kind(), io.to_string())),
            quick_xml::Error::Escape(quick_xml::escape::EscapeError::UnrecognizedEntity(_, name)) => {
                ParseError::UnknownEntity(name)
            }
            other => ParseError::MalformedXml { position: self.reader.error_position(), message: other.to_string() },
        }
    }

    fn attributes(&self, start: &BytesStart) -> Result<Vec<(String, String)>, ParseError> {
        let mut out = Vec::new();
        for attr in start.attributes() {
            let attr = attr.map_err(|e| self.malformed(e.to_string()))?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            let value = attr
                .unescape_value_with(|name| self.entities.get(name))
                .map_err(|e| self.xml_error(e))?
                .trim()
                .to_string();
            out.push((key, value));
        }
        Ok(out)
    }

    fn resolve_ref(&self, raw: &[u8], is_char: Option<char>) -> Result<String, ParseError> {
        if let Some(c) = is_char {
            return Ok(c.to_string());
        }
        let name = String::from_utf8_lossy(raw);
        self.entities.get(&name).map(str::to_string).ok_or_else(|| ParseError::UnknownEntity(name.into_owned()))
    }

    fn finish(&self, rec: PendingRecord) -> Result<RawRecord, ParseError> {
        let attr = |n: &str| rec.attributes.iter().find(|(k, _)| k == n).map(|(_, v)| v.clone());
        let key = attr("key").filter(|k| !k.is_empty()).ok_or_else(|| self.malformed("record without key"))?;
        let mdate_text = attr("mdate").ok_or_else(|| self.malformed(format!("record {key} without mdate")))?;
        let mdate: Date = mdate_text
            .parse()
            .map_err(|_| self.malformed(format!("record {key} has invalid mdate {mdate_text:?}")))?;
        let attributes = rec.attributes.into_iter().filter(|(k, _)| k != "key" && k != "mdate").collect();
        let mut fields = rec.fields;
        for f in &mut fields {
            let trimmed = f.text.trim();
            if trimmed.len() != f.text.len() {
                f.text = trimmed.to_string();
            }
        }
        Ok(RawRecord { kind: rec.kind, key, mdate, attributes, fields })
    }

    fn next_record(&mut self) -> Result<Option<RawRecord>, ParseError> {
        let mut pending: Option<PendingRecord> = None;
        loop {
            self.buf.clear();
            let event = self.reader.read_event_into(&mut self.buf);
            let event = match event {
                Ok(ev) => ev.into_owned(),
                Err(e) => return Err(self.xml_error(e)),
            };
            match event {
                Event::Eof => {
                    if self.depth != 0 || pending.is_some() {
                        return Err(self.malformed("unexpected end of input"));
                    }
                    return Ok(None);
                }
                Event::DocType(text) => {
                    let text = String::from_utf8_lossy(&text.into_inner()).into_owned();
                    self.entities.add_declarations(&text);
                }
                Event::Start(start) => {
                    self.depth += 1;
                    match self.depth {
                        1 => {}
                        2 => {
                            let name = start.name();
                            let tag = String::from_utf8_lossy(name.as_ref()).into_owned();
                            match ElementKind::from_tag(&tag) {
                                Some(kind) => {
                                    pending = Some(PendingRecord {
                                        kind,
                                        attributes: self.attributes(&start)?,
                                        fields: Vec::new(),
                                        field: None,
                                        inline_depth: 0,
                                    });
                                }
                                None => {
                                    let end = start.to_end().into_owned();
                                    let mut skip = Vec::new();
                                    self.reader.read_to_end_into(end.name(), &mut skip).map_err(|e| self.xml_error(e))?;
                                    self.depth -= 1;
                                }
                            }
                        }
                        _ => {
                            let attributes = self.attributes(&start)?;
                            if let Some(rec) = pending.as_mut() {
                                if rec.field.is_none() {
                                    let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                                    rec.field = Some(RawField { name, text: String::new(), attributes });
                                } else {
                                    rec.inline_depth += 1;
                                }
                            }
                        }
                    }
                }
                Event::Empty(start) => {
                    if self.depth == 0 {
                        // Self-closing root element: empty dump.
                        continue;
                    }
                    if self.depth == 1 {
                        let tag = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                        if let Some(kind) = ElementKind::from_tag(&tag) {
                            let rec = PendingRecord {
                                kind,
                                attributes: self.attributes(&start)?,
                                fields: Vec::new(),
                                field: None,
                                inline_depth: 0,
                            };
                            return self.finish(rec).map(Some);
                        }
                        continue;
                    }
                    let attributes = self.attributes(&start)?;
                    if let Some(rec) = pending.as_mut() {
                        if rec.field.is_none() {
                            let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                            rec.fields.push(RawField { name, text: String::new(), attributes });
                        }
                    }
                }
                Event::End(_) => {
                    self.depth = self.depth.checked_sub(1).ok_or_else(|| self.malformed("unbalanced end tag"))?;
                    match self.depth {
                        1 => {
                            if let Some(rec) = pending.take() {
                                return self.finish(rec).map(Some);
                            }
                        }
                        0 => {}
                        _ => {
                            if let Some(rec) = pending.as_mut() {
                                if rec.inline_depth > 0 {
                                    rec.inline_depth -= 1;
                                } else if let Some(f) = rec.field.take() {
                                    rec.fields.push(f);
                                }
                            }
                        }
                    }
                }
                Event::Text(text) => {
                    if let Some(field) = pending.as_mut().and_then(|r| r.field.as_mut()) {
                        let s = text.decode().map_err(|e| self.malformed(e.to_string()))?;
                        field.text.push_str(&s);
                    } else if self.depth == 0 && !text.iter().all(u8::is_ascii_whitespace) {
                        return Err(self.malformed("text outside the root element"));
                    }
                }
                Event::CData(data) => {
                    if let Some(field) = pending.as_mut().and_then(|r| r.field.as_mut()) {
                        let s = data.decode().map_err(|e| self.malformed(e.to_string()))?;
                        field.text.push_str(&s);
                    }
                }
                Event::GeneralRef(r) => {
                    let ch = r.resolve_char_ref().map_err(|e| self.xml_error(e))?;
                    let raw = r.into_inner();
                    let value = self.resolve_ref(&raw, ch)?;
                    if let Some(field) = pending.as_mut().and_then(|r| r.field.as_mut()) {
                        field.text.push_str(&value);
                    }
                }
                Event::Decl(_) | Event::PI(_) | Event::Comment(_) => {}
            }
        }
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<RawRecord, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.finished = true;
                None
            }
            Err(e) => {
                self.finished = true;
                Some(Err(e))
            }
        }
    }
}
