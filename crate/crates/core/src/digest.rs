//! SHA-256 fingerprints over the exact bit patterns of numeric tables.

use alloc::string::String;
use core::fmt::Write;

use sha2::{Digest, Sha256};

#[derive(Default, Clone)]
pub struct Fingerprint {
    inner: Sha256,
}

impl Fingerprint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tag(mut self, tag: &str) -> Self {
        self.inner.update((tag.len() as u64).to_le_bytes());
        self.inner.update(tag.as_bytes());
        self
    }

    pub fn u64(mut self, x: u64) -> Self {
        self.inner.update(x.to_le_bytes());
        self
    }

    pub fn f64s(mut self, xs: &[f64]) -> Self {
        self.inner.update((xs.len() as u64).to_le_bytes());
        for x in xs {
            self.inner.update(x.to_bits().to_le_bytes());
        }
        self
    }

    pub fn u64s(mut self, xs: &[u64]) -> Self {
        self.inner.update((xs.len() as u64).to_le_bytes());
        for x in xs {
            self.inner.update(x.to_le_bytes());
        }
        self
    }

    pub fn bytes(mut self, b: &[u8]) -> Self {
        self.inner.update((b.len() as u64).to_le_bytes());
        self.inner.update(b);
        self
    }

    pub fn hex(self) -> String {
        let bytes = self.inner.finalize();
        let mut s = String::with_capacity(64);
        for b in bytes.iter() {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}
