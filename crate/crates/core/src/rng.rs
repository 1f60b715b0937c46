//! Deterministic sub-streams derived from one master seed.
//!
//! Every random draw in the pipeline comes from a ChaCha8 stream keyed by the
//! master seed and a path of integers (day, hour, method, split, ...). Work
//! can therefore be scheduled in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A position in the stream tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedPath {
    master: u64,
    key: u64,
}

impl SeedPath {
    pub fn new(master: u64) -> Self {
        SeedPath {
            master,
            key: splitmix(master),
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn child(&self, part: u64) -> SeedPath {
        SeedPath {
            master: self.master,
            key: splitmix(self.key ^ splitmix(part.wrapping_add(0x632B_E59B_D9B4_E019))),
        }
    }

    pub fn path(&self, parts: &[u64]) -> SeedPath {
        parts.iter().fold(*self, |p, &x| p.child(x))
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}
