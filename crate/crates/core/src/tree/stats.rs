use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Tree, TreeNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSummary {
    pub leaves: usize,
    pub min: usize,
    pub median: f64,
    pub max: usize,
    pub mean: f64,
    /// N / 2^max_depth: leaf size if every path split evenly to full depth.
    pub ideal: f64,
}

/// Distribution of documents per leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSizeHistogram {
    /// leaf size → number of leaves of that size
    pub counts: BTreeMap<usize, usize>,
    pub summary: LeafSummary,
}

impl LeafSizeHistogram {
    pub fn total_docs(&self) -> usize {
        self.counts.iter().map(|(size, n)| size * n).sum()
    }
}

pub fn leaf_size_histogram(tree: &Tree) -> LeafSizeHistogram {
    let mut sizes: Vec<usize> = tree
        .nodes()
        .iter()
        .filter_map(|n| match n {
            TreeNode::Leaf { docs } => Some(docs.len()),
            TreeNode::Internal { .. } => None,
        })
        .collect();
    sizes.sort_unstable();
    let mut counts = BTreeMap::new();
    for &s in &sizes {
        *counts.entry(s).or_insert(0) += 1;
    }
    let leaves = sizes.len();
    let median = match leaves {
        0 => 0.0,
        n if n % 2 == 1 => sizes[n / 2] as f64,
        n => (sizes[n / 2 - 1] + sizes[n / 2]) as f64 / 2.0,
    };
    let total: usize = sizes.iter().sum();
    let summary = LeafSummary {
        leaves,
        min: sizes.first().copied().unwrap_or(0),
        median,
        max: sizes.last().copied().unwrap_or(0),
        mean: if leaves == 0 { 0.0 } else { total as f64 / leaves as f64 },
        ideal: tree.n_docs() as f64 / 2f64.powi(tree.params().max_depth as i32),
    };
    LeafSizeHistogram { counts, summary }
}
