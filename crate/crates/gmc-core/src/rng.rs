//! Deterministic seeding across replicas and decomposition levels.
//!
//! All Monte Carlo work derives its randomness from a single master seed via
//! ChaCha8 stream selection. Replica `r` owns stream `(r + 1) << 16`; level
//! `l` inside replica `r` owns stream `((r + 1) << 16) | (l + 1)`. Streams
//! never collide between replicas as long as fewer than 2^47 replicas are in
//! flight, and level 0xFFFF is never used, so the replica stream itself is
//! disjoint from every level stream.
//!
//! Parallel ensembles map replicas over a thread pool but reduce in replica
//! order, so estimates do not depend on the worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Maximum number of decomposition levels addressable per replica.
pub const MAX_LEVELS: u64 = 0xFFFE;

/// Provenance of a single stochastic object: which master seed produced it
/// and which replica stream it was drawn on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    pub replica: u64,
}

impl SeedLineage {
    pub fn new(master: u64, replica: u64) -> Self {
        Self { master, replica }
    }

    /// The generator for this replica's own draws.
    pub fn rng(&self) -> ChaCha8Rng {
        replica_rng(self.master, self.replica)
    }

    /// The generator for one decomposition level inside this replica.
    pub fn level_rng(&self, level: u64) -> ChaCha8Rng {
        level_rng(self.master, self.replica, level)
    }
}

/// Generator owned by replica `replica` under `master`.
pub fn replica_rng(master: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((replica + 1) << 16);
    rng
}

/// Generator owned by decomposition level `level` of replica `replica`.
///
/// Panics if `level >= MAX_LEVELS`; ladders are a few hundred levels deep at
/// most, so hitting the cap indicates a bookkeeping bug.
pub fn level_rng(master: u64, replica: u64, level: u64) -> ChaCha8Rng {
    assert!(level < MAX_LEVELS, "level index {level} out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((replica + 1) << 16) | (level + 1));
    rng
}

/// Runs `f` once per replica index, in parallel, collecting results in
/// replica order. The closure receives the replica index and is responsible
/// for deriving its own generators through [`replica_rng`] or [`level_rng`].
pub fn run_replicas<T: Send>(n_replicas: usize, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    (0..n_replicas as u64)
        .into_par_iter()
        .map(&f)
        .collect()
}
