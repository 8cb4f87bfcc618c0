//! Structured queries produced by a session.
//!
//! Rendering grammar (no field tags except on uids, no MeSH expansion):
//!
//! ```text
//! CORE  := POS ( " NOT " term )*
//! POS   := clause ( " AND " clause )*        includes, then bespoke terms
//!        | "all[sb]"                          when only exclusions exist
//! QUERY := CORE
//!        | "(" CORE ") OR (" UIDS ")"
//!        | UIDS                               when CORE is empty
//! UIDS  := uid "[uid]" ( " OR " uid "[uid]" )*
//! ```
//!
//! Multi-word terms are double-quoted.

pub mod remote;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::DocBitset;
use crate::index::IncidenceIndex;

pub use remote::{esearch_remote, EsearchClient, RemoteConfig, RemoteError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    #[serde(default)]
    pub include: Vec<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
    /// Terms answered "maybe"; never rendered.
    #[serde(default)]
    pub omitted: Vec<String>,
    #[serde(default)]
    pub bespoke: Vec<String>,
    #[serde(default)]
    pub uids: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("empty query")]
    Empty,
    #[error("terms both included and excluded: {}", .0.join(", "))]
    Contradiction(Vec<String>),
    #[error("unknown terms: {}", .0.join(", "))]
    UnknownTerms(Vec<String>),
}

/// PubMed subset matching every citation; the positive anchor for a query
/// that only excludes.
const ALL_CITATIONS: &str = "all[sb]";

fn render_term(term: &str) -> String {
    let term = term.trim();
    let plain = term.chars().all(|c| c.is_alphanumeric() || c == '-');
    if plain {
        term.to_string()
    } else {
        format!("\"{}\"", term.replace('"', ""))
    }
}

/// Bespoke entries are user syntax: left alone unless they contain spaces
/// and are not already quoted.
fn render_bespoke(raw: &str) -> Option<String> {
    let raw = raw.trim();
    if raw.is_empty() {
        None
    } else if raw.contains(char::is_whitespace) && !(raw.starts_with('"') && raw.ends_with('"')) {
        Some(format!("\"{}\"", raw.replace('"', "")))
    } else {
        Some(raw.to_string())
    }
}

impl QuerySpec {
    pub fn is_empty(&self) -> bool {
        self.include.is_empty()
            && self.exclude.is_empty()
            && self.uids.is_empty()
            && self.bespoke.iter().all(|b| b.trim().is_empty())
    }

    fn check(&self) -> Result<(), QueryError> {
        let include: BTreeSet<&str> = self.include.iter().map(String::as_str).collect();
        let both: Vec<String> = self.exclude.iter().filter(|e| include.contains(e.as_str())).cloned().collect();
        if !both.is_empty() {
            return Err(QueryError::Contradiction(both));
        }
        if self.is_empty() {
            return Err(QueryError::Empty);
        }
        Ok(())
    }
}

pub fn render_query(qs: &QuerySpec) -> Result<String, QueryError> {
    qs.check()?;
    let positive: Vec<String> =
        qs.include.iter().map(|t| render_term(t)).chain(qs.bespoke.iter().filter_map(|b| render_bespoke(b))).collect();
    let mut core = if !positive.is_empty() {
        positive.join(" AND ")
    } else if !qs.exclude.is_empty() {
        ALL_CITATIONS.to_string()
    } else {
        String::new()
    };
    for e in &qs.exclude {
        core.push_str(" NOT ");
        core.push_str(&render_term(e));
    }
    if qs.uids.is_empty() {
        return Ok(core);
    }
    let uids = qs.uids.iter().map(|u| format!("{}[uid]", u.trim())).collect::<Vec<_>>().join(" OR ");
    if core.is_empty() {
        Ok(uids)
    } else {
        Ok(format!("({core}) OR ({uids})"))
    }
}

/// Evaluate a query against the index:
/// (⋂ includes ∖ ⋃ excludes) ∪ {uids}. With no includes the intersection is
/// the whole corpus if there are exclusions, otherwise empty. Bespoke terms
/// that name an indexed term act as includes; others are skipped.
pub fn local_search(index: &IncidenceIndex, qs: &QuerySpec) -> Result<BTreeSet<usize>, QueryError> {
    qs.check()?;
    let resolve = |terms: &[String]| -> (Vec<&DocBitset>, Vec<String>) {
        let mut found = Vec::new();
        let mut missing = Vec::new();
        for t in terms {
            match index.lookup(t) {
                Some(id) => found.push(index.postings(id)),
                None => missing.push(t.clone()),
            }
        }
        (found, missing)
    };
    let (mut include, mut missing) = resolve(&qs.include);
    let (exclude, missing_ex) = resolve(&qs.exclude);
    missing.extend(missing_ex);
    if !missing.is_empty() {
        return Err(QueryError::UnknownTerms(missing));
    }
    for b in &qs.bespoke {
        let b = b.trim().trim_matches('"').to_lowercase();
        if b.is_empty() {
            continue;
        }
        match index.lookup(&b) {
            Some(id) => include.push(index.postings(id)),
            None => log::warn!("bespoke term '{b}' is not indexed; skipped in local search"),
        }
    }

    let n = index.n_docs();
    let mut hits = if include.is_empty() && exclude.is_empty() {
        DocBitset::new(n)
    } else {
        let mut acc = DocBitset::full(n);
        for p in include {
            acc.intersect_with(p);
        }
        for p in exclude {
            acc.difference_with(p);
        }
        acc
    };
    for uid in &qs.uids {
        if let Some(d) = index.position_of_uid(uid.trim()) {
            hits.insert(d);
        }
    }
    Ok(hits.iter().collect())
}
