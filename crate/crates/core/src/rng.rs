//! Seeded random streams.
//!
//! Every experiment is driven by a single `u64` seed. Independent pieces of
//! work (one estimation call, one grid node, one training run) draw from their
//! own ChaCha8 substream selected by a stream index, so results do not depend
//! on evaluation order or worker count:
//!
//! ```
//! use plaplace::rng::substream;
//! use rand::Rng;
//!
//! let mut a = substream(7, 3);
//! let mut b = substream(7, 3);
//! assert_eq!(a.random::<u64>(), b.random::<u64>());
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Generator for `seed` restricted to stream `stream`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream indices reserved for the top-level stages of an experiment.
/// Per-item streams (anchors, grid nodes) start at [`streams::PER_ITEM`].
pub mod streams {
    /// Random mixture layout (drawn from the mixture seed, not the run seed).
    pub const GMM: u64 = 0;
    pub const DATA: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const SAMPLE: u64 = 3;
    pub const SCENARIO: u64 = 4;
    pub const ANCHORS: u64 = 5;
    pub const BACKGROUND: u64 = 6;
    pub const EVAL: u64 = 7;
    pub const PER_ITEM: u64 = 1 << 20;
}
