//! The candidate question vocabulary.
//!
//! Terms arrive as a list (optionally with inline synonyms), are filtered
//! against their frequency in general-purpose reference texts plus an
//! optional manual blocklist, and are then matched against documents either
//! through synonyms (the default) or through Porter stems. The two matching
//! modes are exclusive for a given build.

mod porter;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, TermMatcher};

pub use porter::porter_stem;

/// Dense 0-based term identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TermId(pub u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub id: TermId,
    pub canonical: String,
    pub synonyms: BTreeSet<String>,
    /// Stemmed canonical form (tokens stemmed, space-joined); only set in
    /// stemming mode.
    pub stem: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Synonyms,
    Stemmed,
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("empty vocabulary")]
    Empty,
    #[error("synonym '{synonym}' of '{canonical}' collides with term '{other}'")]
    SynonymCollision { synonym: String, canonical: String, other: String },
    #[error("malformed line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Occurrence counts of canonical terms in reference texts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReferenceStats {
    pub counts: BTreeMap<String, u64>,
    pub total_tokens: u64,
}

impl ReferenceStats {
    pub fn count(&self, canonical: &str) -> u64 {
        self.counts.get(canonical).copied().unwrap_or(0)
    }
}

/// Canonical form → synonyms, as read from a two-column TSV.
pub type SynonymTable = BTreeMap<String, BTreeSet<String>>;

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<Term>,
    mode: MatchMode,
    by_canonical: HashMap<String, TermId>,
}

impl Vocabulary {
    /// Build from (canonical, synonyms) pairs. Canonical forms are
    /// lowercased and deduplicated; duplicates merge their synonyms.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut merged: Vec<(String, BTreeSet<String>)> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (canonical, synonyms) in entries {
            let canonical = normalize(canonical.as_ref());
            if canonical.is_empty() {
                continue;
            }
            let slot = *seen.entry(canonical.clone()).or_insert_with(|| {
                merged.push((canonical.clone(), BTreeSet::new()));
                merged.len() - 1
            });
            for syn in synonyms {
                let syn = normalize(syn.as_ref());
                if !syn.is_empty() && syn != canonical {
                    merged[slot].1.insert(syn);
                }
            }
        }
        if merged.is_empty() {
            return Err(VocabError::Empty);
        }
        let terms = merged
            .into_iter()
            .enumerate()
            .map(|(i, (canonical, synonyms))| Term { id: TermId(i as u32), canonical, synonyms, stem: None })
            .collect();
        let vocab = Self::from_terms(terms, MatchMode::Synonyms);
        vocab.check_synonyms()?;
        Ok(vocab)
    }

    pub fn from_canonicals<'a>(terms: impl IntoIterator<Item = &'a str>) -> Result<Self, VocabError> {
        Self::from_entries(terms.into_iter().map(|t| (t, Vec::new())))
    }

    /// Reassemble from stored terms; ids are taken as given and must be dense.
    pub(crate) fn from_terms(terms: Vec<Term>, mode: MatchMode) -> Self {
        let by_canonical = terms.iter().map(|t| (t.canonical.clone(), t.id)).collect();
        Vocabulary { terms, mode, by_canonical }
    }

    /// One term per line, optional TAB-separated synonyms after the
    /// canonical form. Blank lines are skipped with a warning.
    pub fn parse_term_list<R: BufRead>(reader: R) -> Result<Self, VocabError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut cols = line.split('\t');
            let canonical = cols.next().unwrap_or("").trim().to_string();
            if canonical.is_empty() {
                log::warn!("term list line {}: blank entry skipped", i + 1);
                continue;
            }
            let synonyms: Vec<String> = cols.map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
            entries.push((canonical, synonyms));
        }
        Self::from_entries(entries)
    }

    pub fn load_term_list(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        let file = std::fs::File::open(path)?;
        Self::parse_term_list(std::io::BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.terms[id.index()]
    }

    pub fn get(&self, id: TermId) -> Option<&Term> {
        self.terms.get(id.index())
    }

    pub fn lookup(&self, canonical: &str) -> Option<TermId> {
        self.by_canonical.get(&normalize(canonical)).copied()
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    /// Switch matching mode. Stemming mode computes stems; synonym mode
    /// clears them.
    pub fn into_mode(mut self, mode: MatchMode) -> Self {
        self.mode = mode;
        for term in &mut self.terms {
            term.stem = match mode {
                MatchMode::Stemmed => {
                    Some(tokenize(&term.canonical).iter().map(|t| porter_stem(t)).collect::<Vec<_>>().join(" "))
                }
                MatchMode::Synonyms => None,
            };
        }
        if mode == MatchMode::Stemmed && self.terms.iter().any(|t| !t.synonyms.is_empty()) {
            log::warn!("stemming mode ignores synonyms");
        }
        self
    }

    fn check_synonyms(&self) -> Result<(), VocabError> {
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for term in &self.terms {
            for syn in &term.synonyms {
                if self.by_canonical.contains_key(syn) {
                    return Err(VocabError::SynonymCollision {
                        synonym: syn.clone(),
                        canonical: term.canonical.clone(),
                        other: syn.clone(),
                    });
                }
                if let Some(prev) = owner.insert(syn, &term.canonical) {
                    if prev != term.canonical {
                        return Err(VocabError::SynonymCollision {
                            synonym: syn.clone(),
                            canonical: term.canonical.clone(),
                            other: prev.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Merge a synonym table. Entries for canonical forms absent from the
    /// vocabulary are ignored. On error the vocabulary is left unchanged.
    pub fn add_synonyms(&mut self, table: &SynonymTable) -> Result<(), VocabError> {
        let mut next = self.clone();
        for (canonical, synonyms) in table {
            let Some(id) = next.lookup(canonical) else {
                log::debug!("synonym table entry for unknown term '{canonical}' ignored");
                continue;
            };
            let term = &mut next.terms[id.index()];
            for syn in synonyms {
                let syn = normalize(syn);
                if !syn.is_empty() && syn != term.canonical {
                    term.synonyms.insert(syn);
                }
            }
        }
        next.check_synonyms()?;
        *self = next;
        Ok(())
    }

    /// Keep the terms satisfying `keep`, re-densifying ids in order.
    pub fn retain(&self, mut keep: impl FnMut(&Term) -> bool) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| keep(t))
            .enumerate()
            .map(|(i, t)| Term { id: TermId(i as u32), ..t.clone() })
            .collect();
        Self::from_terms(terms, self.mode)
    }

    /// Stable digest of the canonical forms, synonyms and mode.
    pub fn checksum(&self) -> u64 {
        let mut h = crate::checksum::Digest64::new();
        h.update(&[self.mode as u8]);
        for t in &self.terms {
            h.update_str(&t.canonical);
            h.update(&(t.synonyms.len() as u32).to_le_bytes());
            for s in &t.synonyms {
                h.update_str(s);
            }
        }
        h.finish()
    }
}

/// Count canonical-form phrase occurrences across `texts`.
pub fn count_reference_occurrences<S: AsRef<str>>(vocab: &Vocabulary, texts: &[S]) -> ReferenceStats {
    let matcher = TermMatcher::canonical_only(vocab);
    let mut by_id = HashMap::new();
    let mut total_tokens = 0;
    for text in texts {
        total_tokens += tokenize(text.as_ref()).len() as u64;
        matcher.count_occurrences(text.as_ref(), &mut by_id);
    }
    let counts = by_id.into_iter().map(|(id, n)| (vocab.term(id).canonical.clone(), n)).collect();
    ReferenceStats { counts, total_tokens }
}

/// Keep terms with at most `max_count` reference occurrences, then drop any
/// blocklisted canonical forms.
pub fn filter_generic(
    vocab: &Vocabulary,
    stats: &ReferenceStats,
    max_count: u64,
    blocklist: &BTreeSet<String>,
) -> Vocabulary {
    vocab.retain(|t| stats.count(&t.canonical) <= max_count && !blocklist.contains(&t.canonical))
}

/// Two-column TSV: canonical TAB synonym.
pub fn parse_synonym_table<R: BufRead>(reader: R) -> Result<SynonymTable, VocabError> {
    let mut table = SynonymTable::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(canonical), Some(synonym)) = (cols.next(), cols.next()) else {
            return Err(VocabError::Malformed { line: i + 1, message: "expected canonical<TAB>synonym".into() });
        };
        let (canonical, synonym) = (normalize(canonical), normalize(synonym));
        if canonical.is_empty() || synonym.is_empty() {
            return Err(VocabError::Malformed { line: i + 1, message: "empty column".into() });
        }
        table.entry(canonical).or_default().insert(synonym);
    }
    Ok(table)
}

pub fn load_synonym_table(path: impl AsRef<Path>) -> Result<SynonymTable, VocabError> {
    let file = std::fs::File::open(path)?;
    parse_synonym_table(std::io::BufReader::new(file))
}

/// One term per line; blank lines ignored; lowercased.
pub fn load_blocklist(path: impl AsRef<Path>) -> Result<BTreeSet<String>, VocabError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().map(normalize).filter(|l| !l.is_empty()).collect())
}
