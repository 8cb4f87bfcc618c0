use std::time::Instant;

use crate::bitset::{words_for, DocBitset};
use crate::index::IncidenceIndex;
use crate::vocabulary::TermId;

use super::{count_entropy, NodeId, Tree, TreeNode, TreeParams};

/// Nodes at least this large build their two subtrees in parallel.
const PARALLEL_MIN_DOCS: usize = 4096;

/// (|node ∩ postings[term]|, |node| − that)
pub fn split_counts(node_docs: &[u32], term: TermId, index: &IncidenceIndex) -> (usize, usize) {
    let posting = index.postings(term);
    let yes = node_docs.iter().filter(|&&d| posting.contains(d as usize)).count();
    (yes, node_docs.len() - yes)
}

/// Entropy reduction from splitting `node_docs` on `term`, every document
/// its own class: log2 n − Σ (n_c/n)·log2 n_c, which is H(n_yes/n).
pub fn information_gain(node_docs: &[u32], term: TermId, index: &IncidenceIndex) -> f64 {
    let (yes, _) = split_counts(node_docs, term, index);
    count_entropy(yes, node_docs.len())
}

#[inline]
fn score(n_yes: usize, n: usize, h_all: f64, depth: u32, params: &TreeParams) -> f64 {
    let h_cur = count_entropy(n_yes, n);
    if depth <= params.scale_after {
        h_cur
    } else {
        h_cur - h_all
    }
}

/// Score of asking `term` as question number `depth` (root = 1).
pub fn term_score(node_docs: &[u32], term: TermId, depth: u32, index: &IncidenceIndex, params: &TreeParams) -> f64 {
    let (yes, _) = split_counts(node_docs, term, index);
    score(yes, node_docs.len(), index.h_all()[term.index()], depth, params)
}

/// Pick the best question from per-term yes counts.
fn choose(
    counts: &[u32],
    n: usize,
    depth: u32,
    used: &[TermId],
    index: &IncidenceIndex,
    params: &TreeParams,
) -> Option<TermId> {
    let h_all = index.h_all();
    let rank = index.lex_rank();
    let mut best: Option<(f64, u32, usize)> = None;
    for (t, &k) in counts.iter().enumerate() {
        let k = k as usize;
        if k == 0 || k >= n {
            continue;
        }
        if used.iter().any(|u| u.index() == t) {
            continue;
        }
        let s = score(k, n, h_all[t], depth, params);
        if s.partial_cmp(&params.min_score) != Some(std::cmp::Ordering::Greater) {
            continue;
        }
        let better = match best {
            None => true,
            Some((bs, br, _)) => s > bs || (s == bs && rank[t] < br),
        };
        if better {
            best = Some((s, rank[t], t));
        }
    }
    best.map(|(_, _, t)| TermId(t as u32))
}

/// Best term to ask at a node, or `None` when nothing scores above
/// `params.min_score`. Ties go to the lexicographically smallest canonical
/// form, then the smallest id.
pub fn select_term(
    node_docs: &[u32],
    depth: u32,
    used: &[TermId],
    index: &IncidenceIndex,
    params: &TreeParams,
) -> Option<TermId> {
    let node = DocBitset::from_indices(index.n_docs(), node_docs.iter().map(|&d| d as usize));
    let counts: Vec<u32> = index.all_postings().iter().map(|p| node.intersection_count(p) as u32).collect();
    choose(&counts, node_docs.len(), depth, used, index, params)
}

/// Term lists per document (CSR layout), derived from the postings.
struct Rows {
    offsets: Vec<usize>,
    terms: Vec<u32>,
}

impl Rows {
    fn new(index: &IncidenceIndex) -> Self {
        let n = index.n_docs();
        let mut len = vec![0usize; n + 1];
        for p in index.all_postings() {
            for d in p.iter() {
                len[d + 1] += 1;
            }
        }
        for i in 0..n {
            len[i + 1] += len[i];
        }
        let offsets = len;
        let mut fill = offsets.clone();
        let mut terms = vec![0u32; offsets[n]];
        for (t, p) in index.all_postings().iter().enumerate() {
            for d in p.iter() {
                terms[fill[d]] = t as u32;
                fill[d] += 1;
            }
        }
        Rows { offsets, terms }
    }

    fn row(&self, doc: u32) -> &[u32] {
        &self.terms[self.offsets[doc as usize]..self.offsets[doc as usize + 1]]
    }

    fn row_len(&self, doc: u32) -> usize {
        self.offsets[doc as usize + 1] - self.offsets[doc as usize]
    }
}

struct Builder<'a> {
    index: &'a IncidenceIndex,
    params: &'a TreeParams,
    rows: Rows,
}

enum Subtree {
    Leaf(Vec<u32>),
    Internal { term: TermId, n_yes: u32, n_no: u32, yes: Box<Subtree>, no: Box<Subtree> },
}

impl Builder<'_> {
    /// Per-term yes counts for the node, via whichever of the two routes
    /// is cheaper: AND-popcount of every posting against the node bitset,
    /// or a scan of the node's document rows.
    fn counts(&self, docs: &[u32]) -> Vec<u32> {
        let n_terms = self.index.n_terms();
        let words = words_for(self.index.n_docs());
        let bitset_cost = n_terms.saturating_mul(words);
        let row_cost: usize = docs.iter().map(|&d| self.rows.row_len(d)).sum::<usize>() * 4 + n_terms;
        if bitset_cost < row_cost {
            let node = DocBitset::from_indices(self.index.n_docs(), docs.iter().map(|&d| d as usize));
            self.index.all_postings().iter().map(|p| node.intersection_count(p) as u32).collect()
        } else {
            let mut counts = vec![0u32; n_terms];
            for &d in docs {
                for &t in self.rows.row(d) {
                    counts[t as usize] += 1;
                }
            }
            counts
        }
    }

    /// `docs` is ascending; after the split the yes documents occupy the
    /// front of the slice, both halves still ascending.
    fn build(&self, docs: &mut [u32], depth: u32, path: &mut Vec<TermId>) -> Subtree {
        let n = docs.len();
        if depth >= self.params.max_depth || n < self.params.min_node_size as usize || n < 2 {
            return Subtree::Leaf(docs.to_vec());
        }
        let counts = self.counts(docs);
        let Some(term) = choose(&counts, n, depth + 1, path, self.index, self.params) else {
            return Subtree::Leaf(docs.to_vec());
        };
        let posting = self.index.postings(term);
        let (mut yes, no): (Vec<u32>, Vec<u32>) = docs.iter().partition(|&&d| posting.contains(d as usize));
        let n_yes = yes.len();
        yes.extend_from_slice(&no);
        docs.copy_from_slice(&yes);
        drop(yes);
        drop(no);

        let (yes_docs, no_docs) = docs.split_at_mut(n_yes);
        let (yes_tree, no_tree) = if n >= PARALLEL_MIN_DOCS {
            let mut yes_path = path.clone();
            yes_path.push(term);
            let mut no_path = yes_path.clone();
            rayon::join(
                || self.build(yes_docs, depth + 1, &mut yes_path),
                || self.build(no_docs, depth + 1, &mut no_path),
            )
        } else {
            path.push(term);
            let y = self.build(yes_docs, depth + 1, path);
            let n = self.build(no_docs, depth + 1, path);
            path.pop();
            (y, n)
        };
        Subtree::Internal {
            term,
            n_yes: n_yes as u32,
            n_no: (n - n_yes) as u32,
            yes: Box::new(yes_tree),
            no: Box::new(no_tree),
        }
    }
}

fn flatten(sub: Subtree, out: &mut Vec<TreeNode>) -> NodeId {
    let id = NodeId(out.len() as u32);
    match sub {
        Subtree::Leaf(docs) => out.push(TreeNode::Leaf { docs }),
        Subtree::Internal { term, n_yes, n_no, yes, no } => {
            out.push(TreeNode::Leaf { docs: Vec::new() });
            let yes = flatten(*yes, out);
            let no = flatten(*no, out);
            out[id.index()] = TreeNode::Internal { term, n_docs: n_yes + n_no, n_yes, n_no, yes, no };
        }
    }
    id
}

/// Build the question tree over every document in the index.
///
/// Deterministic: the parallel build produces exactly the tree a sequential
/// build would.
pub fn build_tree(index: &IncidenceIndex, params: &TreeParams) -> Tree {
    let started = Instant::now();
    let builder = Builder { index, params, rows: Rows::new(index) };
    let mut docs: Vec<u32> = (0..index.n_docs() as u32).collect();
    let root = builder.build(&mut docs, 0, &mut Vec::new());
    let mut nodes = Vec::new();
    flatten(root, &mut nodes);
    log::debug!("built tree with {} nodes in {:?}", nodes.len(), started.elapsed());
    Tree::from_nodes(nodes, params.clone(), index.n_docs() as u32, index.corpus_checksum(), index.vocab_checksum())
}
