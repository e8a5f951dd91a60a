//! Deterministic RNG stream derivation.
//!
//! Every stochastic routine in this crate draws from a ChaCha8 stream whose
//! seed is derived from a master seed and a (stream id, replication) pair by
//! integer arithmetic only, so reruns are bit-exact on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Weyl increment used both by the stream derivation and by SplitMix64.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream ids at and above this value are reserved for internal lanes;
/// agent ids must stay below it.
pub const AGENT_ID_LIMIT: u64 = 1 << 20;

/// Lane for replication-level streams of ensemble estimators.
pub const LANE_REPLICATION: u64 = AGENT_ID_LIMIT;
/// Lane for inner streams of nested (conditional) estimators.
pub const LANE_NESTED: u64 = AGENT_ID_LIMIT + 1;
/// Lane used when materialising random coupling graphs.
pub const LANE_GRAPH: u64 = AGENT_ID_LIMIT + 2;

/// One step of the SplitMix64 output function applied to `state`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream for `(stream_id, replication)` under `master`.
///
/// seed = SplitMix64(master XOR GOLDEN_GAMMA * (stream_id * 2^20 + replication + 1)),
/// all mod 2^64. Distinct pairs map to distinct seeds as long as
/// `stream_id < 2^20` and `replication < 2^20`.
pub fn stream_seed(master: u64, stream_id: u64, replication: u64) -> u64 {
    let index = stream_id
        .wrapping_mul(AGENT_ID_LIMIT)
        .wrapping_add(replication)
        .wrapping_add(1);
    splitmix64(master ^ GOLDEN_GAMMA.wrapping_mul(index))
}

/// ChaCha8 generator for the given stream.
pub fn stream_rng(master: u64, stream_id: u64, replication: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, stream_id, replication))
}

/// Master seed plus the derivation rule above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPolicy {
    pub master: u64,
}

impl SeedPolicy {
    pub fn new(master: u64) -> Self {
        SeedPolicy { master }
    }

    /// Stream for one agent within one replication of a run.
    pub fn agent_rng(&self, agent_id: u64, replication: u64) -> ChaCha8Rng {
        stream_rng(self.master, agent_id, replication)
    }

    /// Stream for replication `rep` of an ensemble estimator.
    pub fn replication_rng(&self, rep: u64) -> ChaCha8Rng {
        stream_rng(self.master, LANE_REPLICATION, rep)
    }

    /// Master seed for the inner stage of a nested estimator, keyed by the
    /// outer replication index.
    pub fn nested_master(&self, outer_rep: u64) -> u64 {
        stream_seed(self.master, LANE_NESTED, outer_rep)
    }
}
