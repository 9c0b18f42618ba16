//! Named random streams derived from one root seed.
//!
//! Every consumer asks for a stream by name (`"sim/shard/3"`,
//! `"sim/shard/3/detector/transmission"`, ...). A stream's seed depends only on
//! the root seed and its name, so adding consumers never shifts existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// 64-bit seed of the named stream.
    pub fn seed(&self, name: &str) -> u64 {
        let digest = self.digest(name);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    /// Generator for the named stream, keyed with the full 256-bit digest.
    pub fn rng(&self, name: &str) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest(name))
    }

    fn digest(&self, name: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.root.to_le_bytes());
        h.update(name.as_bytes());
        let out = h.finalize();
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&out);
        bytes
    }
}

/// Generator seeded directly from a 64-bit value.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    SeedTree::new(seed).rng("")
}
