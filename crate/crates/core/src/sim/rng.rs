//! Named random streams split from the run seed.
//!
//! Each stream is seeded from SHA-256 over the run seed, a label and a list of
//! ids, so adding a drone never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, label: &str, ids: &[u32]) -> StreamRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u32).to_le_bytes());
    h.update(label.as_bytes());
    for id in ids {
        h.update(id.to_le_bytes());
    }
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Protocol-timing stream of one node.
pub fn node_stream(seed: u64, drone_id: u32) -> StreamRng {
    stream(seed, "node", &[drone_id])
}

/// Shadowing stream of the ordered link `tx -> rx`.
pub fn link_stream(seed: u64, tx: u32, rx: u32) -> StreamRng {
    stream(seed, "link", &[tx, rx])
}
