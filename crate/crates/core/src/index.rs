//! Term–document incidence index.
//!
//! One bitset per term over the corpus in file order, with document
//! frequencies and global term entropies cached at construction.

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::bitset::DocBitset;
use crate::checksum::Digest64;
use crate::corpus::{Document, TermMatcher};
use crate::tree::count_entropy;
use crate::vocabulary::{TermId, Vocabulary};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("duplicate uid '{0}'")]
    DuplicateUid(String),
    #[error("unknown term id {0}")]
    UnknownTerm(TermId),
    #[error("inconsistent index parts: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceIndex {
    uids: Vec<String>,
    terms: Vec<String>,
    postings: Vec<DocBitset>,
    df: Vec<u32>,
    h_all: Vec<f64>,
    /// Position of each term in (canonical, id) order; the tie-break key.
    lex_rank: Vec<u32>,
    corpus_checksum: u64,
    vocab_checksum: u64,
}

const CHUNK: usize = 512;

/// Digest of the corpus content in file order.
pub fn corpus_checksum(docs: &[Document]) -> u64 {
    let mut h = Digest64::new();
    h.update(&(docs.len() as u64).to_le_bytes());
    for d in docs {
        h.update_str(&d.uid);
        h.update_str(&d.title);
        h.update_str(&d.abstract_text);
        h.update_str(&d.journal);
        h.update(&(d.mesh.len() as u64).to_le_bytes());
        for m in &d.mesh {
            h.update_str(m);
        }
    }
    h.finish()
}

fn assemble(docs: &[Document], vocab: &Vocabulary, rows: Vec<Vec<TermId>>) -> Result<IncidenceIndex, IndexError> {
    let n = docs.len();
    let mut postings = vec![DocBitset::new(n); vocab.len()];
    for (doc, row) in rows.iter().enumerate() {
        for t in row {
            postings[t.index()].insert(doc);
        }
    }
    IncidenceIndex::from_parts(
        docs.iter().map(|d| d.uid.clone()).collect(),
        vocab.terms().iter().map(|t| t.canonical.clone()).collect(),
        postings,
        corpus_checksum(docs),
        vocab.checksum(),
    )
}

fn check_unique(docs: &[Document]) -> Result<(), IndexError> {
    let mut seen = HashSet::with_capacity(docs.len());
    for d in docs {
        if !seen.insert(d.uid.as_str()) {
            return Err(IndexError::DuplicateUid(d.uid.clone()));
        }
    }
    Ok(())
}

/// Match every document against the vocabulary, in parallel over document
/// chunks. The result does not depend on thread scheduling.
pub fn build_index(docs: &[Document], vocab: &Vocabulary) -> Result<IncidenceIndex, IndexError> {
    check_unique(docs)?;
    let matcher = TermMatcher::new(vocab);
    let rows: Vec<Vec<TermId>> = docs
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            chunk.iter().map(|d| matcher.match_document(d).into_iter().collect::<Vec<_>>()).collect::<Vec<_>>()
        })
        .collect();
    assemble(docs, vocab, rows)
}

/// Single-threaded reference build.
pub fn build_index_sequential(docs: &[Document], vocab: &Vocabulary) -> Result<IncidenceIndex, IndexError> {
    check_unique(docs)?;
    let matcher = TermMatcher::new(vocab);
    let rows = docs.iter().map(|d| matcher.match_document(d).into_iter().collect()).collect();
    assemble(docs, vocab, rows)
}

impl IncidenceIndex {
    /// Assemble from raw postings; recomputes every cache.
    pub fn from_parts(
        uids: Vec<String>,
        terms: Vec<String>,
        postings: Vec<DocBitset>,
        corpus_checksum: u64,
        vocab_checksum: u64,
    ) -> Result<Self, IndexError> {
        let n = uids.len();
        if terms.len() != postings.len() {
            return Err(IndexError::Inconsistent(format!("{} terms but {} postings", terms.len(), postings.len())));
        }
        if let Some(p) = postings.iter().find(|p| p.len() != n) {
            return Err(IndexError::Inconsistent(format!("posting of length {} for {n} documents", p.len())));
        }
        let mut seen = HashSet::with_capacity(n);
        for u in &uids {
            if !seen.insert(u.as_str()) {
                return Err(IndexError::DuplicateUid(u.clone()));
            }
        }
        let df: Vec<u32> = postings.iter().map(|p| p.count_ones() as u32).collect();
        let h_all = df.iter().map(|&k| count_entropy(k as usize, n)).collect();
        let mut order: Vec<usize> = (0..terms.len()).collect();
        order.sort_by(|&a, &b| terms[a].cmp(&terms[b]).then(a.cmp(&b)));
        let mut lex_rank = vec![0u32; terms.len()];
        for (rank, &t) in order.iter().enumerate() {
            lex_rank[t] = rank as u32;
        }
        Ok(IncidenceIndex { uids, terms, postings, df, h_all, lex_rank, corpus_checksum, vocab_checksum })
    }

    pub fn n_docs(&self) -> usize {
        self.uids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn uids(&self) -> &[String] {
        &self.uids
    }

    pub fn uid(&self, doc: usize) -> &str {
        &self.uids[doc]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_name(&self, term: TermId) -> &str {
        &self.terms[term.index()]
    }

    pub fn lookup(&self, canonical: &str) -> Option<TermId> {
        // linear lookup is fine for query resolution; hot paths use ids
        self.terms.iter().position(|t| t == canonical).map(|i| TermId(i as u32))
    }

    pub fn postings(&self, term: TermId) -> &DocBitset {
        &self.postings[term.index()]
    }

    pub fn all_postings(&self) -> &[DocBitset] {
        &self.postings
    }

    fn check(&self, term: TermId) -> Result<(), IndexError> {
        if term.index() < self.terms.len() {
            Ok(())
        } else {
            Err(IndexError::UnknownTerm(term))
        }
    }

    pub fn df(&self, term: TermId) -> Result<u32, IndexError> {
        self.check(term)?;
        Ok(self.df[term.index()])
    }

    /// Binary entropy of the term's incidence over the whole corpus, in bits.
    pub fn global_entropy(&self, term: TermId) -> Result<f64, IndexError> {
        self.check(term)?;
        Ok(self.h_all[term.index()])
    }

    pub(crate) fn h_all(&self) -> &[f64] {
        &self.h_all
    }

    pub(crate) fn lex_rank(&self) -> &[u32] {
        &self.lex_rank
    }

    pub fn corpus_checksum(&self) -> u64 {
        self.corpus_checksum
    }

    pub fn vocab_checksum(&self) -> u64 {
        self.vocab_checksum
    }

    pub fn position_of_uid(&self, uid: &str) -> Option<usize> {
        self.uids.iter().position(|u| u == uid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::match_terms;
    use crate::tree::binary_entropy;

    fn docs(titles: &[&str]) -> Vec<Document> {
        titles.iter().enumerate().map(|(i, t)| Document::new(format!("u{i}")).with_title(*t)).collect()
    }

    #[test]
    fn direct_construction() {
        let v = Vocabulary::from_canonicals(["amyloid", "ribosome"]).unwrap();
        let idx = build_index(&docs(&["amyloid beta", "tau", "Amyloid plaques"]), &v).unwrap();
        let amyloid = v.lookup("amyloid").unwrap();
        assert_eq!(idx.postings(amyloid).iter().collect::<Vec<_>>(), [0, 2]);
        assert_eq!(idx.df(amyloid).unwrap(), 2);
        let ribosome = v.lookup("ribosome").unwrap();
        assert_eq!(idx.df(ribosome).unwrap(), 0);
        assert_eq!(idx.global_entropy(ribosome).unwrap(), 0.0);
    }

    #[test]
    fn balanced_term_has_one_bit() {
        let v = Vocabulary::from_canonicals(["x"]).unwrap();
        let idx = build_index(&docs(&["x", "y", "x", "z"]), &v).unwrap();
        assert_eq!(idx.global_entropy(TermId(0)).unwrap(), 1.0);
    }

    #[test]
    fn entropy_cache_values() {
        let n = 10;
        let mk = |k: usize| DocBitset::from_indices(n, 0..k);
        let idx = IncidenceIndex::from_parts(
            (0..n).map(|i| i.to_string()).collect(),
            vec!["a".into(), "b".into()],
            vec![mk(0), mk(5)],
            0,
            0,
        )
        .unwrap();
        assert_eq!(idx.global_entropy(TermId(0)).unwrap(), 0.0);
        assert_eq!(idx.global_entropy(TermId(1)).unwrap(), 1.0);
        let quarter = IncidenceIndex::from_parts(
            (0..4).map(|i| i.to_string()).collect(),
            vec!["a".into()],
            vec![DocBitset::from_indices(4, [2])],
            0,
            0,
        )
        .unwrap();
        assert!((quarter.global_entropy(TermId(0)).unwrap() - 0.811278).abs() < 1e-6);
        assert!((quarter.global_entropy(TermId(0)).unwrap() - binary_entropy(0.25).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn unknown_term() {
        let v = Vocabulary::from_canonicals(["x"]).unwrap();
        let idx = build_index(&docs(&["x"]), &v).unwrap();
        assert_eq!(idx.df(TermId(3)), Err(IndexError::UnknownTerm(TermId(3))));
        assert!(idx.global_entropy(TermId(1)).is_err());
    }

    #[test]
    fn duplicate_uid() {
        let v = Vocabulary::from_canonicals(["x"]).unwrap();
        let d = vec![Document::new("7"), Document::new("8"), Document::new("7")];
        assert_eq!(build_index(&d, &v).unwrap_err(), IndexError::DuplicateUid("7".into()));
    }

    #[test]
    fn postings_match_brute_force_and_sequential() {
        let words = ["alpha", "beta", "gamma", "delta", "cd4", "t-cells", "amyloid", "plaques"];
        let v = Vocabulary::parse_term_list("alpha\tdelta\nbeta gamma\nt-cells\namyloid plaques\ncd4\n".as_bytes())
            .unwrap();
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        let corpus: Vec<Document> = (0..1500)
            .map(|i| {
                let mut text = String::new();
                for _ in 0..(next() % 8) {
                    text.push_str(words[next() % words.len()]);
                    text.push(' ');
                }
                Document::new(format!("{i}")).with_abstract(text).with_mesh([words[next() % words.len()]])
            })
            .collect();
        let par = build_index(&corpus, &v).unwrap();
        let seq = build_index_sequential(&corpus, &v).unwrap();
        assert_eq!(par, seq);
        for (i, d) in corpus.iter().enumerate() {
            let hits = match_terms(d, &v);
            for t in v.terms() {
                assert_eq!(par.postings(t.id).contains(i), hits.contains(&t.id));
            }
        }
        for t in 0..par.n_terms() {
            assert_eq!(par.df(TermId(t as u32)).unwrap() as usize, par.all_postings()[t].count_ones());
        }
    }
}
