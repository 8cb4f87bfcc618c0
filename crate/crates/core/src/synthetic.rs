//! Seeded random corpora for tests and benchmarks.
//!
//! Term names are zero-padded (`t00042`) so lexicographic order matches id
//! order. Every generator is deterministic in its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bitset::DocBitset;
use crate::checksum::Digest64;
use crate::corpus::Document;
use crate::index::IncidenceIndex;
use crate::vocabulary::Vocabulary;

pub fn term_name(t: usize, n_terms: usize) -> String {
    let width = n_terms.saturating_sub(1).to_string().len().max(5);
    format!("t{t:0width$}")
}

pub fn uid_for(doc: usize) -> String {
    format!("{}", 10_000_000 + doc)
}

/// Draw one posting list with P(doc has term) = `p`. Sparse lists skip ahead
/// geometrically instead of drawing once per document.
fn bernoulli_posting(n_docs: usize, p: f64, rng: &mut ChaCha8Rng) -> DocBitset {
    let mut bits = DocBitset::new(n_docs);
    if p <= 0.0 {
        return bits;
    }
    if p >= 1.0 {
        return DocBitset::full(n_docs);
    }
    if p > 0.25 {
        for d in 0..n_docs {
            if rng.random_bool(p) {
                bits.insert(d);
            }
        }
        return bits;
    }
    let log_q = (1.0 - p).ln();
    let mut d = 0usize;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if !skip.is_finite() || skip >= (n_docs - d) as f64 {
            break;
        }
        d += skip as usize;
        bits.insert(d);
        d += 1;
        if d >= n_docs {
            break;
        }
    }
    bits
}

/// Index whose term `t` occurs independently in each document with
/// probability `probs[t]`.
pub fn index_with_probabilities(n_docs: usize, probs: &[f64], seed: u64) -> IncidenceIndex {
    let postings: Vec<DocBitset> = probs
        .par_iter()
        .enumerate()
        .map(|(t, &p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            bernoulli_posting(n_docs, p, &mut rng)
        })
        .collect();
    let terms: Vec<String> = (0..probs.len()).map(|t| term_name(t, probs.len())).collect();
    let uids: Vec<String> = (0..n_docs).map(uid_for).collect();
    let vocab_checksum =
        Vocabulary::from_canonicals(terms.iter().map(String::as_str)).map(|v| v.checksum()).unwrap_or(0);
    let mut digest = Digest64::new();
    digest.update_str("synthetic");
    digest.update(&seed.to_le_bytes());
    digest.update(&(n_docs as u64).to_le_bytes());
    for p in probs {
        digest.update(&p.to_bits().to_le_bytes());
    }
    IncidenceIndex::from_parts(uids, terms, postings, digest.finish(), vocab_checksum)
        .expect("generated parts are consistent")
}

pub fn bernoulli_index(n_docs: usize, n_terms: usize, p: f64, seed: u64) -> IncidenceIndex {
    index_with_probabilities(n_docs, &vec![p; n_terms], seed)
}

/// `p_t = scale · (1 + t / 10)^-exponent`: a few common terms and a long
/// tail of rare ones.
pub fn power_law_probabilities(n_terms: usize, scale: f64, exponent: f64) -> Vec<f64> {
    (0..n_terms).map(|t| (scale * (1.0 + t as f64 / 10.0).powf(-exponent)).clamp(0.0, 1.0)).collect()
}

/// Index with every probability drawn uniformly from `[lo, hi)`.
pub fn random_probability_index(n_docs: usize, n_terms: usize, lo: f64, hi: f64, seed: u64) -> IncidenceIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let probs: Vec<f64> = (0..n_terms).map(|_| rng.random_range(lo..hi)).collect();
    index_with_probabilities(n_docs, &probs, seed)
}

/// The vocabulary an index generated here was built from.
pub fn vocabulary_for(index: &IncidenceIndex) -> Vocabulary {
    Vocabulary::from_canonicals(index.terms().iter().map(String::as_str)).expect("index has terms")
}

/// Documents whose abstracts list exactly their indexed terms, so that
/// indexing them against [`vocabulary_for`] reproduces the postings.
pub fn documents_for(index: &IncidenceIndex) -> Vec<Document> {
    let mut words: Vec<Vec<&str>> = vec![Vec::new(); index.n_docs()];
    for (t, posting) in index.all_postings().iter().enumerate() {
        for d in posting.iter() {
            words[d].push(&index.terms()[t]);
        }
    }
    words.into_iter().enumerate().map(|(d, w)| Document::new(index.uid(d)).with_abstract(w.join(" "))).collect()
}
