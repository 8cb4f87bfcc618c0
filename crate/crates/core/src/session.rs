//! One interactive walk down the question tree.
//!
//! "yes" and "no" follow the matching child. "maybe" follows whichever child
//! holds more documents (the yes child on a tie) and keeps the term out of
//! the final query. A session finishes on reaching a leaf or after
//! `max_depth` answers, and can always be finished early.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::query::QuerySpec;
use crate::tree::{NodeId, Tree, TreeNode};
use crate::vocabulary::TermId;
use crate::Artifact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Maybe,
}

impl FromStr for Answer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(Answer::Yes),
            "no" | "n" => Ok(Answer::No),
            "maybe" | "m" => Ok(Answer::Maybe),
            other => Err(format!("invalid answer '{other}' (expected yes, no or maybe)")),
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Maybe => "maybe",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("session is finished")]
    Finished,
    #[error("nothing to undo")]
    NothingToUndo,
}

/// The question at the current node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub term: String,
    pub term_id: TermId,
    /// 1-based question number.
    pub depth: u32,
    pub n_yes: u32,
    pub n_no: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub term: TermId,
    pub answer: Answer,
    /// Node the question was asked at.
    pub node: NodeId,
}

#[derive(Clone)]
pub struct Session {
    artifact: Arc<Artifact>,
    current: NodeId,
    path: Vec<Step>,
    finished: bool,
    limit: u32,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("current", &self.current)
            .field("path", &self.path)
            .field("finished", &self.finished)
            .field("limit", &self.limit)
            .finish()
    }
}

/// Equal when walking the same artifact to the same state.
impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.artifact, &other.artifact)
            && self.current == other.current
            && self.path == other.path
            && self.finished == other.finished
            && self.limit == other.limit
    }
}

impl Session {
    /// Session at the root, capped at the tree's `max_depth` answers.
    pub fn start(artifact: Arc<Artifact>) -> Self {
        let limit = artifact.tree.params().max_depth;
        Self::with_limit(artifact, limit)
    }

    /// Session with a tighter (or looser) answer cap than the tree depth.
    pub fn with_limit(artifact: Arc<Artifact>, limit: u32) -> Self {
        let finished = artifact.tree.root().is_leaf() || limit == 0;
        Session { artifact, current: Tree::ROOT, path: Vec::new(), finished, limit }
    }

    pub fn artifact(&self) -> &Arc<Artifact> {
        &self.artifact
    }

    pub fn tree(&self) -> &Tree {
        &self.artifact.tree
    }

    pub fn current(&self) -> NodeId {
        self.current
    }

    pub fn current_node(&self) -> &TreeNode {
        self.tree().node(self.current)
    }

    pub fn path(&self) -> &[Step] {
        &self.path
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }

    /// Documents under the current node.
    pub fn remaining(&self) -> usize {
        self.current_node().n_docs()
    }

    pub fn question(&self) -> Result<Question, SessionError> {
        if self.finished {
            return Err(SessionError::Finished);
        }
        match self.current_node() {
            TreeNode::Internal { term, n_yes, n_no, .. } => Ok(Question {
                term: self.artifact.index.term_name(*term).to_string(),
                term_id: *term,
                depth: self.path.len() as u32 + 1,
                n_yes: *n_yes,
                n_no: *n_no,
            }),
            TreeNode::Leaf { .. } => Err(SessionError::Finished),
        }
    }

    pub fn answer(&mut self, answer: Answer) -> Result<&mut Self, SessionError> {
        if self.finished {
            return Err(SessionError::Finished);
        }
        let TreeNode::Internal { term, n_yes, n_no, yes, no, .. } = *self.current_node() else {
            return Err(SessionError::Finished);
        };
        let next = match answer {
            Answer::Yes => yes,
            Answer::No => no,
            Answer::Maybe if n_yes >= n_no => yes,
            Answer::Maybe => no,
        };
        self.path.push(Step { term, answer, node: self.current });
        self.current = next;
        if self.current_node().is_leaf() || self.path.len() as u32 >= self.limit {
            self.finished = true;
        }
        Ok(self)
    }

    pub fn can_refine(&self) -> bool {
        !self.finished && !self.current_node().is_leaf()
    }

    pub fn undo(&mut self) -> Result<&mut Self, SessionError> {
        let step = self.path.pop().ok_or(SessionError::NothingToUndo)?;
        self.current = step.node;
        self.finished = false;
        Ok(self)
    }

    /// Stop here and produce the query. Leaves with fewer than
    /// `uid_leaf_threshold` documents add their uids.
    pub fn finish(&mut self, bespoke: Vec<String>) -> QuerySpec {
        self.finished = true;
        self.query_spec(bespoke)
    }

    /// The query the current state would produce, without finishing.
    pub fn query_spec(&self, bespoke: Vec<String>) -> QuerySpec {
        let index = &self.artifact.index;
        let name = |t: TermId| index.term_name(t).to_string();
        let pick = |a: Answer| self.path.iter().filter(|s| s.answer == a).map(|s| name(s.term)).collect();
        let threshold = self.tree().params().uid_leaf_threshold as usize;
        let uids = match self.current_node() {
            TreeNode::Leaf { docs } if docs.len() < threshold => {
                docs.iter().map(|&d| index.uid(d as usize).to_string()).collect()
            }
            _ => Vec::new(),
        };
        QuerySpec { include: pick(Answer::Yes), exclude: pick(Answer::No), omitted: pick(Answer::Maybe), bespoke, uids }
    }

    /// Document indices under the current node.
    pub fn documents(&self) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![self.current];
        while let Some(id) = stack.pop() {
            match self.tree().node(id) {
                TreeNode::Leaf { docs } => out.extend_from_slice(docs),
                TreeNode::Internal { yes, no, .. } => {
                    stack.push(*no);
                    stack.push(*yes);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitset::DocBitset;
    use crate::index::IncidenceIndex;
    use crate::tree::{build_tree, TreeParams};
    use crate::vocabulary::Vocabulary;

    /// 8 docs, "metazoan" in 0..4, "biosynthesis" in {0,1,4,5}, "adults" in {0,2,4,6}.
    fn artifact() -> Arc<Artifact> {
        artifact_with(8, &[("metazoan", &[0, 1, 2, 3]), ("biosynthesis", &[0, 1, 4, 5]), ("adults", &[0, 2, 4, 6])])
    }

    fn artifact_with(n: usize, terms: &[(&str, &[usize])]) -> Arc<Artifact> {
        let vocab = Vocabulary::from_canonicals(terms.iter().map(|(t, _)| *t)).unwrap();
        let index = IncidenceIndex::from_parts(
            (0..n).map(|i| format!("{}", 1000 + i)).collect(),
            terms.iter().map(|(t, _)| t.to_string()).collect(),
            terms.iter().map(|(_, d)| DocBitset::from_indices(n, d.iter().copied())).collect(),
            1,
            2,
        )
        .unwrap();
        let tree = build_tree(&index, &TreeParams::default());
        Arc::new(Artifact { vocab, index, tree })
    }

    #[test]
    fn start_at_root() {
        let a = artifact();
        let s = Session::start(a.clone());
        assert_eq!(s.depth(), 0);
        assert_eq!(s.current(), Tree::ROOT);
        assert!(!s.is_finished());
        let mut other = Session::start(a);
        other.answer(Answer::Yes).unwrap();
        assert_eq!(s.depth(), 0);
    }

    #[test]
    fn single_leaf_starts_finished() {
        let a = artifact_with(3, &[("x", &[])]);
        let s = Session::start(a);
        assert!(s.is_finished());
        assert_eq!(s.question(), Err(SessionError::Finished));
        assert!(!s.can_refine());
    }

    #[test]
    fn question_reports_counts() {
        // all three terms split 4/4; "adults" is lexicographically first
        let s = Session::start(artifact());
        let q = s.question().unwrap();
        assert_eq!(q.term, "adults");
        assert_eq!(q.depth, 1);
        assert_eq!(q.n_yes + q.n_no, s.remaining() as u32);
    }

    #[test]
    fn metazoan_root_when_best() {
        let a = artifact_with(8, &[("metazoan", &[0, 1, 2, 3]), ("biosynthesis", &[0, 1, 4]), ("adults", &[0])]);
        assert_eq!(Session::start(a).question().unwrap().term, "metazoan");
    }

    #[test]
    fn maybe_takes_majority_child() {
        let a = artifact_with(10, &[("t", &[0, 1, 2]), ("u", &[3])]);
        let mut s = Session::start(a);
        let q = s.question().unwrap();
        assert_eq!((q.term.as_str(), q.n_yes, q.n_no), ("t", 3, 7));
        s.answer(Answer::Maybe).unwrap();
        assert_eq!(s.remaining(), 7);
        let spec = s.query_spec(vec![]);
        assert_eq!(spec.omitted, ["t"]);
        assert!(spec.include.is_empty() && spec.exclude.is_empty());
    }

    #[test]
    fn maybe_tie_goes_yes() {
        let mut s = Session::start(artifact());
        let TreeNode::Internal { yes, .. } = *s.current_node() else { panic!() };
        s.answer(Answer::Maybe).unwrap();
        assert_eq!(s.current(), yes);
    }

    #[test]
    fn yes_into_leaf_finishes() {
        let a = artifact_with(4, &[("t", &[0])]);
        let mut s = Session::start(a);
        s.answer(Answer::Yes).unwrap();
        assert!(s.is_finished());
        assert!(s.current_node().is_leaf());
        assert_eq!(s.answer(Answer::No).unwrap_err(), SessionError::Finished);
    }

    #[test]
    fn undo_is_inverse() {
        let mut s = Session::start(artifact());
        let before = s.clone();
        s.answer(Answer::No).unwrap();
        s.undo().unwrap();
        assert_eq!(s, before);
        s.answer(Answer::Yes).unwrap().answer(Answer::No).unwrap();
        s.undo().unwrap().undo().unwrap();
        assert_eq!(s, before);
        assert_eq!(s.undo().unwrap_err(), SessionError::NothingToUndo);
    }

    #[test]
    fn undo_reopens_finished() {
        let mut s = Session::start(artifact());
        while !s.is_finished() {
            s.answer(Answer::Yes).unwrap();
        }
        s.undo().unwrap();
        assert!(!s.is_finished());
        assert!(s.can_refine());
    }

    #[test]
    fn finish_maps_answers() {
        let a = artifact_with(8, &[("metazoan", &[0, 1, 2, 3]), ("biosynthesis", &[0, 4]), ("adults", &[1, 5])]);
        let mut s = Session::start(a);
        assert_eq!(s.question().unwrap().term, "metazoan");
        s.answer(Answer::Yes).unwrap();
        let q = s.question().unwrap();
        s.answer(Answer::No).unwrap();
        let spec = s.finish(vec!["cd4".into()]);
        assert_eq!(spec.include, ["metazoan"]);
        assert_eq!(spec.exclude, [q.term]);
        assert_eq!(spec.bespoke, ["cd4"]);
        assert!(s.is_finished());
    }

    #[test]
    fn small_leaf_adds_uids() {
        let a = artifact_with(16, &[("t", &(0..6).collect::<Vec<_>>())]);
        let mut s = Session::start(a);
        s.answer(Answer::Yes).unwrap();
        assert_eq!(s.remaining(), 6);
        let spec = s.finish(vec![]);
        assert_eq!(spec.uids, ["1000", "1001", "1002", "1003", "1004", "1005"]);
        let a = artifact_with(16, &[("t", &(0..6).collect::<Vec<_>>())]);
        let mut s = Session::start(a);
        s.answer(Answer::No).unwrap();
        assert_eq!(s.remaining(), 10);
        assert!(s.finish(vec![]).uids.is_empty());
    }

    #[test]
    fn answer_parsing() {
        assert_eq!("Y".parse::<Answer>(), Ok(Answer::Yes));
        assert_eq!("maybe".parse::<Answer>(), Ok(Answer::Maybe));
        assert!("perhaps".parse::<Answer>().is_err());
    }
}
