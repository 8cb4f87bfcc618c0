use sha2::{Digest, Sha256};

/// 64-bit digest: the first eight bytes (little-endian) of SHA-256.
#[derive(Clone, Default)]
pub struct Digest64(Sha256);

impl Digest64 {
    pub fn new() -> Self {
        Digest64(Sha256::new())
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }

    /// Length-prefixed so that ("ab", "c") and ("a", "bc") differ.
    pub fn update_str(&mut self, s: &str) {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
    }

    pub fn finish(self) -> u64 {
        let out = self.0.finalize();
        let mut first = [0u8; 8];
        first.copy_from_slice(&out[..8]);
        u64::from_le_bytes(first)
    }
}

pub fn digest64(bytes: &[u8]) -> u64 {
    let mut d = Digest64::new();
    d.update(bytes);
    d.finish()
}
