//! Synthetic benchmark data: random sparse maps, random initial states,
//! noise-free simulated responses, and Gaussian observation noise.
//!
//! Everything here is a pure function of its arguments including the seed.
//! The generator family is fixed to ChaCha8 so the same seed reproduces the
//! same data on every platform; independent draws (one per sequence) come
//! from separate ChaCha streams of the same seed rather than from splitting
//! a single stream, which keeps results stable under parallel evaluation.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{ActivationFamily, ActivationSpec};
use crate::error::{Error, Result};
use crate::fcm::{simulate, ResponseSet, StateVector, WeightMatrix};

pub(crate) fn default_prune_threshold() -> f64 {
    0.05
}

/// Recipe for a random sparse map: `floor(density * n^2)` entries drawn
/// uniformly from `[-1, 1]`, with draws smaller in magnitude than
/// `pruneThreshold` zeroed out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RandomFcmSpec {
    pub n: usize,
    /// Fraction of the n*n grid (diagonal included) that receives a draw.
    pub density: f64,
    pub activation: ActivationSpec,
    pub seed: u64,
    #[serde(default = "default_prune_threshold")]
    pub prune_threshold: f64,
}

impl RandomFcmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("map needs at least one node".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "density must be in (0, 1], got {}",
                self.density
            )));
        }
        if !(self.prune_threshold >= 0.0 && self.prune_threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pruneThreshold must be nonnegative, got {}",
                self.prune_threshold
            )));
        }
        Ok(())
    }
}

/// Additive Gaussian observation noise `N(mu, sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NoiseSpec {
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise must have finite mu and sigma >= 0, got mu={}, sigma={}",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }
}

/// Draw a random sparse map. `floor(density * n^2)` positions are chosen
/// uniformly without replacement over the whole grid (self-loops included);
/// each gets a value uniform in `[-1, 1]`, then values with magnitude below
/// `pruneThreshold` are dropped back to zero, so the final nonzero count can
/// be lower than the draw count.
pub fn generate_fcm(spec: &RandomFcmSpec) -> Result<WeightMatrix> {
    spec.validate()?;
    let n = spec.n;
    let draws = ((spec.density * (n * n) as f64).floor() as usize).min(n * n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let positions = rand::seq::index::sample(&mut rng, n * n, draws);
    let uniform = Uniform::new_inclusive(-1.0, 1.0).expect("constant bounds");
    let mut weights = Array2::zeros((n, n));
    for pos in positions {
        let value: f64 = uniform.sample(&mut rng);
        weights[(pos / n, pos % n)] = if value.abs() < spec.prune_threshold {
            0.0
        } else {
            value
        };
    }
    WeightMatrix::new(weights)
}

/// Draw `m` initial state vectors with components i.i.d. uniform on the
/// activation family's range.
pub fn generate_initials(
    m: usize,
    n: usize,
    family: ActivationFamily,
    seed: u64,
) -> Result<Vec<StateVector>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "need m >= 1 and n >= 1, got m={m}, n={n}"
        )));
    }
    let (lo, hi) = family.range();
    let uniform = Uniform::new_inclusive(lo, hi).expect("constant bounds");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| StateVector::from_vec((0..n).map(|_| uniform.sample(&mut rng)).collect()))
        .collect()
}

/// Simulate `k` steps from every initial vector. Sequences are independent,
/// so they are produced in parallel.
pub fn generate_responses(
    fcm: &WeightMatrix,
    spec: &ActivationSpec,
    initials: &[StateVector],
    k: usize,
) -> Result<ResponseSet> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "responses need k >= 2 steps, got {k}"
        )));
    }
    let sequences: Vec<Array2<f64>> = initials
        .par_iter()
        .map(|init| simulate(init, fcm, spec, k))
        .collect::<Result<_>>()?;
    ResponseSet::new(initials.to_vec(), sequences)
}

/// Add an independent `N(mu, sigma)` sample to every response entry. The
/// stored initial vectors are left untouched, and noised values are NOT
/// clamped back into the activation range — observations may fall outside
/// it, exactly as real measurements would. Sequence `s` draws from stream
/// `s` of the seed, so the result does not depend on evaluation order.
pub fn add_noise(rs: &ResponseSet, noise: &NoiseSpec) -> Result<ResponseSet> {
    noise.validate()?;
    let normal = Normal::new(noise.mu, noise.sigma).expect("validated parameters");
    let sequences: Vec<Array2<f64>> = rs
        .sequences()
        .par_iter()
        .enumerate()
        .map(|(s, seq)| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(s as u64);
            seq.mapv(|v| v + normal.sample(&mut rng))
        })
        .collect();
    ResponseSet::new(rs.initials().to_vec(), sequences)
}
