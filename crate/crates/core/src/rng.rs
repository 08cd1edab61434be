//! Named random streams derived from a single run seed.
//!
//! Every consumer (initialization, environment noise, CEM sampling, batching)
//! draws from its own ChaCha stream so that adding draws in one place never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Root of the per-run stream tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A stream keyed by name.
    pub fn stream(&self, name: &str) -> StreamRng {
        self.indexed(name, 0)
    }

    /// A stream keyed by name and an index (member id, episode id, ...).
    pub fn indexed(&self, name: &str, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ fnv1a(name.as_bytes())));
        rng.set_stream(index);
        rng
    }

    /// A child tree, for handing a whole subsystem its own namespace.
    pub fn child(&self, name: &str, index: u64) -> Streams {
        Streams {
            seed: splitmix64(self.seed ^ fnv1a(name.as_bytes()) ^ splitmix64(index.wrapping_add(1))),
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
