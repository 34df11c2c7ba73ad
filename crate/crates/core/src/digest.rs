//! Content digests identifying a problem instance in checkpoints and output headers.

use sha2::{Digest, Sha256};

/// Incremental SHA-256 over a canonical little-endian encoding of numbers and tags.
#[derive(Default)]
pub struct InstanceHasher(Sha256);

impl InstanceHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn f64(mut self, x: f64) -> Self {
        self.0.update(x.to_bits().to_le_bytes());
        self
    }

    pub fn u64(mut self, x: u64) -> Self {
        self.0.update(x.to_le_bytes());
        self
    }

    pub fn tag(mut self, s: &str) -> Self {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
        self
    }

    pub fn finish(self) -> [u8; 32] {
        self.0.finalize().into()
    }
}

pub fn hex(d: &[u8]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}
