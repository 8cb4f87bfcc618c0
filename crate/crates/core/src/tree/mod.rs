//! Binary question tree built by recursive partitioning.
//!
//! Every internal node asks whether one term occurs in the sought document.
//! Each document is treated as its own class with uniform weight, so the
//! information gain of a split reduces to the binary entropy of the yes
//! fraction. From question `scale_after + 1` on, the score is the node-local
//! term entropy minus the term's corpus-wide entropy, which pushes globally
//! common terms towards the top of the tree.

mod build;
mod entropy;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::IncidenceIndex;
use crate::vocabulary::TermId;

pub use build::{build_tree, information_gain, select_term, split_counts, term_score};
pub use entropy::{binary_entropy, count_entropy, ProbabilityOutOfRange};
pub use stats::{leaf_size_histogram, LeafSizeHistogram, LeafSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Longest question path; also the session question cap.
    pub max_depth: u32,
    /// Questions up to and including this depth use plain information gain.
    pub scale_after: u32,
    /// Leaves with fewer documents than this contribute their uids to queries.
    pub uid_leaf_threshold: u32,
    /// Nodes smaller than this are never split.
    pub min_node_size: u32,
    /// Candidates must score strictly above this.
    pub min_score: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 18, scale_after: 4, uid_leaf_threshold: 10, min_node_size: 2, min_score: 0.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("max_depth must be at least 1")]
    MaxDepth,
    #[error("scale_after ({scale_after}) must not exceed max_depth ({max_depth})")]
    ScaleAfter { scale_after: u32, max_depth: u32 },
    #[error("min_score must be finite")]
    MinScore,
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.max_depth < 1 {
            return Err(ParamsError::MaxDepth);
        }
        if self.scale_after > self.max_depth {
            return Err(ParamsError::ScaleAfter { scale_after: self.scale_after, max_depth: self.max_depth });
        }
        if !self.min_score.is_finite() {
            return Err(ParamsError::MinScore);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeNode {
    Internal {
        term: TermId,
        n_docs: u32,
        n_yes: u32,
        n_no: u32,
        yes: NodeId,
        no: NodeId,
    },
    /// Document indices in ascending order.
    Leaf {
        docs: Vec<u32>,
    },
}

impl TreeNode {
    pub fn n_docs(&self) -> usize {
        match self {
            TreeNode::Internal { n_docs, .. } => *n_docs as usize,
            TreeNode::Leaf { docs } => docs.len(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

/// A built tree. Nodes are stored in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    params: TreeParams,
    n_docs: u32,
    corpus_checksum: u64,
    vocab_checksum: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid tree: {0}")]
pub struct TreeInvariantError(pub String);

impl Tree {
    pub(crate) fn from_nodes(
        nodes: Vec<TreeNode>,
        params: TreeParams,
        n_docs: u32,
        corpus_checksum: u64,
        vocab_checksum: u64,
    ) -> Self {
        Tree { nodes, params, n_docs, corpus_checksum, vocab_checksum }
    }

    pub const ROOT: NodeId = NodeId(0);

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs as usize
    }

    pub fn corpus_checksum(&self) -> u64 {
        self.corpus_checksum
    }

    pub fn vocab_checksum(&self) -> u64 {
        self.vocab_checksum
    }

    /// (leaf id, depth) for every leaf, left (yes) to right.
    pub fn leaves(&self) -> Vec<(NodeId, u32)> {
        let mut out = Vec::new();
        let mut stack = vec![(Tree::ROOT, 0u32)];
        while let Some((id, depth)) = stack.pop() {
            match self.node(id) {
                TreeNode::Leaf { .. } => out.push((id, depth)),
                TreeNode::Internal { yes, no, .. } => {
                    stack.push((*no, depth + 1));
                    stack.push((*yes, depth + 1));
                }
            }
        }
        out
    }

    pub fn depth(&self) -> u32 {
        self.leaves().iter().map(|&(_, d)| d).max().unwrap_or(0)
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    /// Follow the truthful path of document `doc` to its leaf.
    pub fn route(&self, index: &IncidenceIndex, doc: usize) -> NodeId {
        let mut id = Tree::ROOT;
        while let TreeNode::Internal { term, yes, no, .. } = self.node(id) {
            id = if index.postings(*term).contains(doc) { *yes } else { *no };
        }
        id
    }

    /// Check every structural invariant against the index it was built from.
    pub fn validate(&self, index: &IncidenceIndex) -> Result<(), TreeInvariantError> {
        let fail = |m: String| Err(TreeInvariantError(m));
        if self.n_docs as usize != index.n_docs() {
            return fail(format!("tree has {} documents, index {}", self.n_docs, index.n_docs()));
        }
        if self.nodes.is_empty() {
            return fail("no nodes".into());
        }
        let mut seen = vec![false; index.n_docs()];
        let mut visited = 0usize;
        // (node, document set, depth, terms on path)
        let mut stack: Vec<(NodeId, Vec<u32>, u32, Vec<TermId>)> =
            vec![(Tree::ROOT, (0..index.n_docs() as u32).collect(), 0, Vec::new())];
        while let Some((id, docs, depth, path)) = stack.pop() {
            visited += 1;
            let Some(node) = self.nodes.get(id.index()) else {
                return fail(format!("dangling node reference {}", id.0));
            };
            if depth > self.params.max_depth {
                return fail(format!("node {} at depth {depth} exceeds max_depth", id.0));
            }
            match node {
                TreeNode::Leaf { docs: leaf } => {
                    if leaf != &docs {
                        return fail(format!("leaf {} holds the wrong documents", id.0));
                    }
                    for &d in leaf {
                        if std::mem::replace(&mut seen[d as usize], true) {
                            return fail(format!("document {d} in two leaves"));
                        }
                    }
                }
                TreeNode::Internal { term, n_docs, n_yes, n_no, yes, no } => {
                    if term.index() >= index.n_terms() {
                        return fail(format!("unknown term {term}"));
                    }
                    if path.contains(term) {
                        return fail(format!("term {term} asked twice on one path"));
                    }
                    let posting = index.postings(*term);
                    let (y, n): (Vec<u32>, Vec<u32>) = docs.iter().partition(|&&d| posting.contains(d as usize));
                    if *n_docs as usize != docs.len() || *n_yes as usize != y.len() || *n_no as usize != n.len() {
                        return fail(format!("node {} counts disagree with its document set", id.0));
                    }
                    if y.is_empty() || n.is_empty() {
                        return fail(format!("node {} has an empty child", id.0));
                    }
                    let mut child_path = path.clone();
                    child_path.push(*term);
                    stack.push((*no, n, depth + 1, child_path.clone()));
                    stack.push((*yes, y, depth + 1, child_path));
                }
            }
        }
        if visited != self.nodes.len() {
            return fail(format!("{} unreachable nodes", self.nodes.len() - visited));
        }
        if let Some(d) = seen.iter().position(|s| !s) {
            return fail(format!("document {d} in no leaf"));
        }
        Ok(())
    }
}
