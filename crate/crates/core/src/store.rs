//! Artifact container: vocabulary, index and tree in one checksummed file.
//!
//! All integers are little-endian. Strings are a `u32` byte length followed
//! by UTF-8 bytes. The byte layout is documented in `docs/artifact-format.md`.
//!
//! ```text
//! 0    [u8; 4]  magic "PTRE"
//! 4    u32      format version (1)
//! 8    u64      corpus checksum
//! 16   u64      vocabulary checksum
//! 24   u32      section count k
//! 28   u32      reserved, 0
//! 32   k × 32   section table: u32 kind, u32 reserved, u64 offset, u64 length, u64 payload digest
//! 32+32k u64    header digest over bytes [0, 32 + 32k)
//! ...           payloads, in table order
//! ```

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::bitset::{words_for, DocBitset};
use crate::checksum::digest64;
use crate::index::{IncidenceIndex, IndexError};
use crate::tree::{NodeId, Tree, TreeNode, TreeParams};
use crate::vocabulary::{MatchMode, Term, TermId, Vocabulary};
use crate::Artifact;

pub const MAGIC: [u8; 4] = *b"PTRE";
pub const VERSION: u32 = 1;

const HEADER_FIXED: usize = 32;
const SECTION_ENTRY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum SectionKind {
    Params = 1,
    Vocabulary = 2,
    Index = 3,
    Tree = 4,
}

impl SectionKind {
    const ALL: [SectionKind; 4] = [SectionKind::Params, SectionKind::Vocabulary, SectionKind::Index, SectionKind::Tree];

    fn name(self) -> &'static str {
        match self {
            SectionKind::Params => "params",
            SectionKind::Vocabulary => "vocabulary",
            SectionKind::Index => "index",
            SectionKind::Tree => "tree",
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not an artifact file (bad magic)")]
    BadMagic,
    #[error("unsupported artifact version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch in {0}")]
    Checksum(&'static str),
    #[error("artifact file is truncated")]
    Truncated,
    #[error("malformed artifact: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<IndexError> for StoreError {
    fn from(e: IndexError) -> Self {
        StoreError::Malformed(e.to_string())
    }
}

#[derive(Default)]
struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length fits in u32"));
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).ok_or(StoreError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(StoreError::Truncated)?;
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn str(&mut self) -> Result<String, StoreError> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| StoreError::Malformed("invalid UTF-8 string".into()))
    }
    fn finish(&self, what: &str) -> Result<(), StoreError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(StoreError::Malformed(format!("{} trailing bytes in {what}", self.buf.len() - self.pos)))
        }
    }
}

fn encode_params(p: &TreeParams) -> Vec<u8> {
    let mut e = Encoder::default();
    e.u32(p.max_depth);
    e.u32(p.scale_after);
    e.u32(p.uid_leaf_threshold);
    e.u32(p.min_node_size);
    e.u64(p.min_score.to_bits());
    e.0
}

fn decode_params(buf: &[u8]) -> Result<TreeParams, StoreError> {
    let mut d = Decoder::new(buf);
    let p = TreeParams {
        max_depth: d.u32()?,
        scale_after: d.u32()?,
        uid_leaf_threshold: d.u32()?,
        min_node_size: d.u32()?,
        min_score: f64::from_bits(d.u64()?),
    };
    d.finish("params")?;
    p.validate().map_err(|e| StoreError::Malformed(e.to_string()))?;
    Ok(p)
}

fn encode_vocab(v: &Vocabulary) -> Vec<u8> {
    let mut e = Encoder::default();
    e.u8(match v.mode() {
        MatchMode::Synonyms => 0,
        MatchMode::Stemmed => 1,
    });
    e.len(v.len());
    for t in v.terms() {
        e.str(&t.canonical);
        e.len(t.synonyms.len());
        for s in &t.synonyms {
            e.str(s);
        }
        match &t.stem {
            Some(s) => {
                e.u8(1);
                e.str(s);
            }
            None => e.u8(0),
        }
    }
    e.0
}

fn decode_vocab(buf: &[u8]) -> Result<Vocabulary, StoreError> {
    let mut d = Decoder::new(buf);
    let mode = match d.u8()? {
        0 => MatchMode::Synonyms,
        1 => MatchMode::Stemmed,
        other => return Err(StoreError::Malformed(format!("unknown match mode {other}"))),
    };
    let n = d.u32()? as usize;
    let mut terms = Vec::with_capacity(n.min(buf.len()));
    for i in 0..n {
        let canonical = d.str()?;
        let n_syn = d.u32()? as usize;
        let synonyms = (0..n_syn).map(|_| d.str()).collect::<Result<_, _>>()?;
        let stem = match d.u8()? {
            0 => None,
            1 => Some(d.str()?),
            other => return Err(StoreError::Malformed(format!("bad stem flag {other}"))),
        };
        terms.push(Term { id: TermId(i as u32), canonical, synonyms, stem });
    }
    d.finish("vocabulary")?;
    Ok(Vocabulary::from_terms(terms, mode))
}

fn encode_index(idx: &IncidenceIndex) -> Vec<u8> {
    let mut e = Encoder::default();
    e.len(idx.n_docs());
    for u in idx.uids() {
        e.str(u);
    }
    e.len(idx.n_terms());
    for t in idx.terms() {
        e.str(t);
    }
    e.len(words_for(idx.n_docs()));
    for p in idx.all_postings() {
        for &w in p.words() {
            e.u64(w);
        }
    }
    e.0
}

fn decode_index(buf: &[u8], corpus_checksum: u64, vocab_checksum: u64) -> Result<IncidenceIndex, StoreError> {
    let mut d = Decoder::new(buf);
    let n_docs = d.u32()? as usize;
    let uids = (0..n_docs).map(|_| d.str()).collect::<Result<Vec<_>, _>>()?;
    let n_terms = d.u32()? as usize;
    let terms = (0..n_terms).map(|_| d.str()).collect::<Result<Vec<_>, _>>()?;
    let words = d.u32()? as usize;
    if words != words_for(n_docs) {
        return Err(StoreError::Malformed(format!("{words} words per posting for {n_docs} documents")));
    }
    let mut postings = Vec::with_capacity(n_terms);
    for t in 0..n_terms {
        let w = (0..words).map(|_| d.u64()).collect::<Result<Vec<_>, _>>()?;
        let p = DocBitset::from_words(n_docs, w)
            .ok_or_else(|| StoreError::Malformed(format!("posting {t} has bits past the last document")))?;
        postings.push(p);
    }
    d.finish("index")?;
    Ok(IncidenceIndex::from_parts(uids, terms, postings, corpus_checksum, vocab_checksum)?)
}

fn encode_tree(tree: &Tree) -> Vec<u8> {
    let mut e = Encoder::default();
    e.len(tree.n_docs());
    e.len(tree.nodes().len());
    for node in tree.nodes() {
        match node {
            TreeNode::Leaf { docs } => {
                e.u8(0);
                e.len(docs.len());
                for &d in docs {
                    e.u32(d);
                }
            }
            TreeNode::Internal { term, n_yes, n_no, .. } => {
                e.u8(1);
                e.u32(term.0);
                e.u32(*n_yes);
                e.u32(*n_no);
            }
        }
    }
    e.0
}

fn decode_tree(buf: &[u8], params: TreeParams, corpus_checksum: u64, vocab_checksum: u64) -> Result<Tree, StoreError> {
    let mut d = Decoder::new(buf);
    let n_docs = d.u32()?;
    let count = d.u32()? as usize;
    let mut nodes: Vec<TreeNode> = Vec::with_capacity(count.min(buf.len()));
    // internal nodes still waiting for a child: (node index, yes child assigned)
    let mut open: Vec<(usize, bool)> = Vec::new();
    for id in 0..count {
        if id > 0 {
            let Some((parent, has_yes)) = open.last_mut() else {
                return Err(StoreError::Malformed("tree has unreachable nodes".into()));
            };
            let TreeNode::Internal { yes, no, .. } = &mut nodes[*parent] else { unreachable!() };
            if *has_yes {
                *no = NodeId(id as u32);
                open.pop();
            } else {
                *yes = NodeId(id as u32);
                *has_yes = true;
            }
        }
        match d.u8()? {
            0 => {
                let len = d.u32()? as usize;
                let docs = (0..len).map(|_| d.u32()).collect::<Result<Vec<_>, _>>()?;
                nodes.push(TreeNode::Leaf { docs });
            }
            1 => {
                let term = TermId(d.u32()?);
                let n_yes = d.u32()?;
                let n_no = d.u32()?;
                let n = n_yes.checked_add(n_no).ok_or_else(|| StoreError::Malformed("node count overflow".into()))?;
                nodes.push(TreeNode::Internal { term, n_docs: n, n_yes, n_no, yes: NodeId(0), no: NodeId(0) });
                open.push((id, false));
            }
            tag => return Err(StoreError::Malformed(format!("unknown node tag {tag}"))),
        }
    }
    if !open.is_empty() || nodes.is_empty() {
        return Err(StoreError::Malformed("tree ends with incomplete nodes".into()));
    }
    d.finish("tree")?;
    Ok(Tree::from_nodes(nodes, params, n_docs, corpus_checksum, vocab_checksum))
}

/// Serialize an artifact. Identical artifacts give identical bytes.
pub fn to_bytes(artifact: &Artifact) -> Vec<u8> {
    let payloads = [
        (SectionKind::Params, encode_params(artifact.tree.params())),
        (SectionKind::Vocabulary, encode_vocab(&artifact.vocab)),
        (SectionKind::Index, encode_index(&artifact.index)),
        (SectionKind::Tree, encode_tree(&artifact.tree)),
    ];
    let header_len = HEADER_FIXED + SECTION_ENTRY * payloads.len() + 8;
    let mut head = Encoder::default();
    head.0.extend_from_slice(&MAGIC);
    head.u32(VERSION);
    head.u64(artifact.index.corpus_checksum());
    head.u64(artifact.index.vocab_checksum());
    head.len(payloads.len());
    head.u32(0);
    let mut offset = header_len as u64;
    for (kind, data) in &payloads {
        head.u32(*kind as u32);
        head.u32(0);
        head.u64(offset);
        head.u64(data.len() as u64);
        head.u64(digest64(data));
        offset += data.len() as u64;
    }
    let digest = digest64(&head.0);
    head.u64(digest);
    let mut out = head.0;
    for (_, data) in payloads {
        out.extend_from_slice(&data);
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Artifact, StoreError> {
    let mut d = Decoder::new(bytes);
    if d.take(4)? != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let version = d.u32()?;
    if version != VERSION {
        return Err(StoreError::Version { found: version, expected: VERSION });
    }
    let corpus_checksum = d.u64()?;
    let vocab_checksum = d.u64()?;
    let count = d.u32()? as usize;
    let _reserved = d.u32()?;
    let table_end = HEADER_FIXED
        .checked_add(count.checked_mul(SECTION_ENTRY).ok_or(StoreError::Truncated)?)
        .ok_or(StoreError::Truncated)?;
    let header = bytes.get(..table_end).ok_or(StoreError::Truncated)?;
    let mut entries = Vec::with_capacity(count.min(16));
    for _ in 0..count {
        let kind = d.u32()?;
        let _ = d.u32()?;
        entries.push((kind, d.u64()?, d.u64()?, d.u64()?));
    }
    if d.u64()? != digest64(header) {
        return Err(StoreError::Checksum("header"));
    }

    let mut sections: [Option<&[u8]>; 4] = [None; 4];
    for (kind, offset, len, digest) in entries {
        let Some(k) = SectionKind::ALL.into_iter().find(|k| *k as u32 == kind) else {
            return Err(StoreError::Malformed(format!("unknown section kind {kind}")));
        };
        let start = usize::try_from(offset).map_err(|_| StoreError::Truncated)?;
        let end =
            start.checked_add(usize::try_from(len).map_err(|_| StoreError::Truncated)?).ok_or(StoreError::Truncated)?;
        let data = bytes.get(start..end).ok_or(StoreError::Truncated)?;
        if digest64(data) != digest {
            return Err(StoreError::Checksum(k.name()));
        }
        let slot = &mut sections[k as usize - 1];
        if slot.is_some() {
            return Err(StoreError::Malformed(format!("duplicate {} section", k.name())));
        }
        *slot = Some(data);
    }
    let section =
        |k: SectionKind| sections[k as usize - 1].ok_or(StoreError::Malformed(format!("missing {} section", k.name())));

    let params = decode_params(section(SectionKind::Params)?)?;
    let vocab = decode_vocab(section(SectionKind::Vocabulary)?)?;
    if vocab.checksum() != vocab_checksum {
        return Err(StoreError::Checksum("vocabulary digest"));
    }
    let index = decode_index(section(SectionKind::Index)?, corpus_checksum, vocab_checksum)?;
    if index.n_terms() != vocab.len() {
        return Err(StoreError::Malformed("index and vocabulary disagree on term count".into()));
    }
    let tree = decode_tree(section(SectionKind::Tree)?, params, corpus_checksum, vocab_checksum)?;
    tree.validate(&index).map_err(|e| StoreError::Malformed(e.to_string()))?;
    Ok(Artifact { vocab, index, tree })
}

pub fn save(artifact: &Artifact, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let bytes = to_bytes(artifact);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Artifact, StoreError> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn artifact() -> Artifact {
        let vocab_index = synthetic::bernoulli_index(100, 12, 0.3, 7);
        let vocab = synthetic::vocabulary_for(&vocab_index);
        Artifact::from_index(vocab, vocab_index, &TreeParams::default()).unwrap()
    }

    #[test]
    fn round_trip_deep_equality() {
        let a = artifact();
        let bytes = to_bytes(&a);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, a);
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn file_round_trip() {
        let a = artifact();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ptre");
        save(&a, &path).unwrap();
        assert_eq!(load(&path).unwrap(), a);
    }

    #[test]
    fn flipped_payload_byte() {
        let a = artifact();
        let mut bytes = to_bytes(&a);
        let last = bytes.len() - 3;
        bytes[last] ^= 0x40;
        assert!(matches!(from_bytes(&bytes), Err(StoreError::Checksum(_))));
    }

    #[test]
    fn flipped_header_byte() {
        let mut bytes = to_bytes(&artifact());
        bytes[9] ^= 1;
        assert!(matches!(from_bytes(&bytes), Err(StoreError::Checksum("header"))));
    }

    #[test]
    fn newer_version_rejected() {
        let mut bytes = to_bytes(&artifact());
        bytes[4..8].copy_from_slice(&(VERSION + 1).to_le_bytes());
        assert!(matches!(from_bytes(&bytes), Err(StoreError::Version { found: 2, expected: 1 })));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = to_bytes(&artifact());
        bytes[0] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(StoreError::BadMagic)));
    }

    #[test]
    fn truncated() {
        let bytes = to_bytes(&artifact());
        for cut in [2, 20, 100, bytes.len() - 1] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(StoreError::Truncated)), "cut at {cut}");
        }
    }
}
