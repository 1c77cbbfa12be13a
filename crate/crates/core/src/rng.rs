//! Seeded random streams.
//!
//! Every stochastic component draws from a `ChaCha8Rng` so results are
//! reproducible across platforms. Independent streams are derived from a
//! master seed by selecting the ChaCha stream id.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type IleaRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> IleaRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> IleaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}
