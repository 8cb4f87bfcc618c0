//! Fixed-length document bitsets.

/// A bitset over `len` documents, stored as little-endian 64-bit words.
/// Bits past `len` in the last word are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DocBitset {
    len: usize,
    words: Vec<u64>,
}

pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl DocBitset {
    pub fn new(len: usize) -> Self {
        DocBitset { len, words: vec![0; words_for(len)] }
    }

    pub fn full(len: usize) -> Self {
        let mut s = DocBitset { len, words: vec![u64::MAX; words_for(len)] };
        s.clear_tail();
        s
    }

    /// Adopt raw words. Returns `None` if the length does not fit or tail
    /// bits are set.
    pub fn from_words(len: usize, words: Vec<u64>) -> Option<Self> {
        if words.len() != words_for(len) {
            return None;
        }
        let s = DocBitset { len, words };
        let mut trimmed = s.clone();
        trimmed.clear_tail();
        (trimmed == s).then_some(s)
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// |self ∩ other|
    pub fn intersection_count(&self, other: &DocBitset) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    pub fn intersect_with(&mut self, other: &DocBitset) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn union_with(&mut self, other: &DocBitset) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference_with(&mut self, other: &DocBitset) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}
