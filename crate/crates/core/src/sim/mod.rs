//! Monte Carlo oracles for the analytic model: a slot-level DCF contention
//! simulator and a fluid on-off queue fed by its off-times.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), one stream per node: the key
//! is expanded from the 64-bit run seed by `SeedableRng::seed_from_u64` and the
//! stream id is the node id (0 is the tagged base station). Backoff counters are
//! drawn with `rand`'s uniform integer sampler, so a run is fully determined by
//! `(seed, DcfParams, horizon)`.

mod dcf;
mod queue;

pub use dcf::{
    node_rng, read_samples, simulate_dcf, write_samples, DcfSimStats, DcfSimulator, OffTimeStats,
    SimConfig, SlotKind, SlotOutcome, MGF_GRID,
};
pub use queue::{simulate_onoff_queue, QueueConfig, QueueStats};
