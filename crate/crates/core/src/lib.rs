//! Hierarchical document search over a binary question tree.
//!
//! The pipeline: parse a corpus ([`corpus`]), prepare a filtered vocabulary
//! ([`vocabulary`]), build the term–document incidence index ([`index`]),
//! grow the question tree ([`tree`]), then walk it interactively
//! ([`session`]) to a structured query that can be evaluated locally or sent
//! to an E-utilities endpoint ([`query`]). [`store`] persists the built
//! artifact.

pub mod bitset;
pub mod checksum;
pub mod corpus;
pub mod index;
pub mod query;
pub mod session;
pub mod store;
pub mod synthetic;
pub mod tree;
pub mod vocabulary;

pub use bitset::DocBitset;
pub use corpus::{parse_corpus, tokenize, CorpusFormat, Document};
pub use index::{build_index, IncidenceIndex};
pub use query::{local_search, render_query, QuerySpec};
pub use session::{Answer, Question, Session};
pub use tree::{build_tree, leaf_size_histogram, Tree, TreeNode, TreeParams};
pub use vocabulary::{MatchMode, TermId, Vocabulary};

/// Everything a search needs: the vocabulary, the index built from it and
/// the tree built over the index.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub vocab: Vocabulary,
    pub index: IncidenceIndex,
    pub tree: Tree,
}

impl Artifact {
    /// Index `docs` and grow the tree in one go.
    pub fn build(docs: &[Document], vocab: Vocabulary, params: &TreeParams) -> Result<Self, BuildError> {
        params.validate()?;
        let index = build_index(docs, &vocab)?;
        let tree = build_tree(&index, params);
        Ok(Artifact { vocab, index, tree })
    }

    pub fn from_index(vocab: Vocabulary, index: IncidenceIndex, params: &TreeParams) -> Result<Self, BuildError> {
        params.validate()?;
        let tree = build_tree(&index, params);
        Ok(Artifact { vocab, index, tree })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Params(#[from] tree::ParamsError),
    #[error(transparent)]
    Index(#[from] index::IndexError),
}
