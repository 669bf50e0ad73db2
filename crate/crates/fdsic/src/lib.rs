//! Frequency-domain nonlinear self-interference cancellation for
//! flexible-duplex OFDM.
//!
//! The crate is organised bottom-up:
//!
//! * [`ofdm`]: grid, allocations, transforms, cyclic prefix, QAM symbols.
//! * [`impairments`]: IQ imbalance and the memoryless polynomial PA.
//! * [`chain`]: one symbol through IQ imbalance, PA, SI channel and noise.
//! * [`channel`]: ray-based MIMO SI channel, beams and the effective
//!   scalar channel.
//! * [`imd`]: nonlinear basis (direct and recursive), IMD set sizes,
//!   basis-power expectations and the impulse pilot.
//! * [`sic`]: estimation (IQ, PA, channel, basis selection), running
//!   cancellation and baselines.
//! * [`counter`]: multiplication and addition counts per stage.
//! * [`oracle`]: slow reference computations used by the tests.
//!
//! Transform convention: the IDFT carries the `1/P` factor and the DFT
//! carries none.

pub mod chain;
pub mod channel;
pub mod counter;
pub mod error;
pub mod imd;
pub mod impairments;
pub mod ofdm;
pub mod oracle;
pub mod sic;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Deterministic PRNG used everywhere in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Circular complex Gaussian sample with `E|z|^2 = var`.
pub fn cgauss<R: rand::Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}
