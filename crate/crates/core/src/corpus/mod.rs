//! Corpus records and the mapping from vocabulary terms onto them.
//!
//! Two input formats are understood: JSONL (one document object per line,
//! the canonical interchange format) and a small subset of MEDLINE citation
//! XML. Both produce [`Document`]s in file order.

mod matcher;
mod medline;
mod tokenize;

use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matcher::{match_terms, TermMatcher};
pub use tokenize::tokenize;

/// One corpus record.
///
/// All text fields may be empty; only `uid` is required.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub uid: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub journal: String,
    #[serde(default)]
    pub mesh: Vec<String>,
}

impl Document {
    pub fn new(uid: impl Into<String>) -> Self {
        Document {
            uid: uid.into(),
            title: String::new(),
            abstract_text: String::new(),
            journal: String::new(),
            mesh: Vec::new(),
        }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn with_abstract(mut self, text: impl Into<String>) -> Self {
        self.abstract_text = text.into();
        self
    }

    pub fn with_journal(mut self, journal: impl Into<String>) -> Self {
        self.journal = journal.into();
        self
    }

    pub fn with_mesh<I, S>(mut self, mesh: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.mesh = mesh.into_iter().map(Into::into).collect();
        self
    }

    /// The searchable fields, each matched independently. MeSH headings are
    /// separate fields so phrases never straddle two headings.
    pub fn fields(&self) -> impl Iterator<Item = &str> {
        [self.title.as_str(), self.abstract_text.as_str(), self.journal.as_str()]
            .into_iter()
            .chain(self.mesh.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    MedlineXml,
}

impl CorpusFormat {
    /// Guess from a file name: `.xml` is MEDLINE XML, anything else JSONL.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("xml") => CorpusFormat::MedlineXml,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "medline-xml" | "xml" => Ok(CorpusFormat::MedlineXml),
            other => Err(format!("unknown corpus format '{other}' (expected jsonl or medline-xml)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record at record {record}: {message}")]
    Malformed { record: usize, message: String },
    #[error("missing uid at record {record}")]
    MissingUid { record: usize },
    #[error("i/o error reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// Parse a whole corpus stream.
pub fn parse_corpus<R: BufRead>(reader: R, format: CorpusFormat) -> Result<Vec<Document>, CorpusError> {
    match format {
        CorpusFormat::Jsonl => JsonlDocuments::new(reader).collect(),
        CorpusFormat::MedlineXml => medline::parse(reader),
    }
}

/// Streaming JSONL reader. Blank lines are skipped; record numbers are
/// 1-based line numbers.
pub struct JsonlDocuments<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> JsonlDocuments<R> {
    pub fn new(reader: R) -> Self {
        JsonlDocuments { lines: reader.lines(), line_no: 0 }
    }
}

#[derive(Deserialize)]
struct RawDocument {
    uid: Option<serde_json::Value>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default, rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    journal: Option<String>,
    #[serde(default)]
    mesh: Option<Vec<String>>,
}

fn parse_jsonl_record(line: &str, record: usize) -> Result<Document, CorpusError> {
    let raw: RawDocument =
        serde_json::from_str(line).map_err(|e| CorpusError::Malformed { record, message: e.to_string() })?;
    let uid = match raw.uid {
        Some(serde_json::Value::String(s)) => s.trim().to_string(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(serde_json::Value::Null) | None => String::new(),
        Some(other) => {
            return Err(CorpusError::Malformed {
                record,
                message: format!("uid must be a string or integer, got {other}"),
            })
        }
    };
    if uid.is_empty() {
        return Err(CorpusError::MissingUid { record });
    }
    Ok(Document {
        uid,
        title: raw.title.unwrap_or_default(),
        abstract_text: raw.abstract_text.unwrap_or_default(),
        journal: raw.journal.unwrap_or_default(),
        mesh: raw.mesh.unwrap_or_default(),
    })
}

impl<R: BufRead> Iterator for JsonlDocuments<R> {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(parse_jsonl_record(&line, self.line_no));
        }
    }
}
