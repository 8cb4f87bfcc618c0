//! Shared workloads for the benchmarks.

use branchsearch_core::{synthetic, Document, IncidenceIndex, Vocabulary};

/// Power-law corpus: a few frequent terms, many rare ones.
pub fn power_law_index(n_docs: usize, n_terms: usize, seed: u64) -> IncidenceIndex {
    let probs = synthetic::power_law_probabilities(n_terms, 0.5, 0.8);
    synthetic::index_with_probabilities(n_docs, &probs, seed)
}

/// Documents and vocabulary that index back to `index`.
pub fn corpus_for(index: &IncidenceIndex) -> (Vec<Document>, Vocabulary) {
    (synthetic::documents_for(index), synthetic::vocabulary_for(index))
}
