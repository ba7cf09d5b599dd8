//! Global-best particle swarm baseline: searches the full n² weight matrix
//! at once for the lowest free-run reproduction error, the same quantity the
//! data-error metric reports. It exists as a comparison point for the
//! per-node convex learner, not as a recommended method.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};
use crate::fcm::{ResponseSet, WeightMatrix};
use crate::metrics::data_error;

/// Velocity components are clamped to this magnitude — half the width of
/// the `[-1, 1]` search box — so one update cannot fling a particle across
/// the whole range.
const VELOCITY_LIMIT: f64 = 1.0;

/// The stall test compares the global best against its value this many
/// iterations earlier.
const STALL_WINDOW: usize = 20;

fn default_population_size() -> usize {
    20
}
fn default_max_iters() -> usize {
    500
}
fn default_accel() -> f64 {
    2.0
}
fn default_inertia_start() -> f64 {
    0.9
}
fn default_inertia_end() -> f64 {
    0.4
}
fn default_min_error_grad() -> f64 {
    1e-20
}

/// Swarm parameters. Positions always live in `[-1, 1]` per dimension;
/// velocities start at zero and are clamped to [`VELOCITY_LIMIT`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PsoConfig {
    #[serde(default = "default_population_size")]
    pub population_size: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Acceleration toward a particle's own best position.
    #[serde(default = "default_accel")]
    pub accel1: f64,
    /// Acceleration toward the swarm's best position.
    #[serde(default = "default_accel")]
    pub accel2: f64,
    /// Inertia weight at the first iteration; decays linearly to
    /// `inertiaEnd` at the last.
    #[serde(default = "default_inertia_start")]
    pub inertia_start: f64,
    #[serde(default = "default_inertia_end")]
    pub inertia_end: f64,
    /// Stop once the global best improved by less than this over the last
    /// [`STALL_WINDOW`] iterations.
    #[serde(default = "default_min_error_grad")]
    pub min_error_grad: f64,
    pub seed: u64,
}

impl PsoConfig {
    /// Standard parameters; only the seed has no sensible default.
    pub fn new(seed: u64) -> Self {
        PsoConfig {
            population_size: default_population_size(),
            max_iters: default_max_iters(),
            accel1: default_accel(),
            accel2: default_accel(),
            inertia_start: default_inertia_start(),
            inertia_end: default_inertia_end(),
            min_error_grad: default_min_error_grad(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "populationSize must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "maxIters must be at least 1".into(),
            ));
        }
        for (name, value) in [
            ("accel1", self.accel1),
            ("accel2", self.accel2),
            ("inertiaStart", self.inertia_start),
            ("inertiaEnd", self.inertia_end),
            ("minErrorGrad", self.min_error_grad),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {value}"
                )));
            }
        }
        if self.inertia_start < self.inertia_end {
            return Err(Error::InvalidParameter(format!(
                "inertiaStart ({}) must not be below inertiaEnd ({})",
                self.inertia_start, self.inertia_end
            )));
        }
        Ok(())
    }
}

/// The quantity the swarm minimizes: mean squared free-run reproduction
/// error of the stored sequences, identical to the data-error metric so the
/// two learners compete on the same score.
pub fn fitness(w: &WeightMatrix, rs: &ResponseSet, spec: &ActivationSpec) -> Result<f64> {
    data_error(rs, w, spec)
}

fn reshape(position: &Array1<f64>, n: usize) -> Result<WeightMatrix> {
    let grid = Array2::from_shape_vec((n, n), position.to_vec())
        .expect("position length is n * n by construction");
    WeightMatrix::new(grid)
}

/// Run the swarm and return the best weight matrix along with the global
/// best fitness after initialization and after every iteration. All random
/// draws come from one sequential ChaCha stream, so a seed fixes the whole
/// trajectory; only the (pure) fitness evaluations run in parallel, and the
/// best-of-swarm reductions resolve ties toward the lowest particle index.
fn pso_learn_traced(
    rs: &ResponseSet,
    spec: &ActivationSpec,
    cfg: &PsoConfig,
) -> Result<(WeightMatrix, Vec<f64>)> {
    cfg.validate()?;
    let n = rs.n();
    let dim = n * n;
    let pop = cfg.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let uniform = Uniform::new_inclusive(-1.0, 1.0).expect("constant bounds");
    let unit = Uniform::new(0.0, 1.0).expect("constant bounds");

    let mut positions: Vec<Array1<f64>> = (0..pop)
        .map(|_| Array1::from_iter((0..dim).map(|_| uniform.sample(&mut rng))))
        .collect();
    let mut velocities: Vec<Array1<f64>> = vec![Array1::zeros(dim); pop];

    let evaluate = |positions: &[Array1<f64>]| -> Result<Vec<f64>> {
        positions
            .par_iter()
            .map(|p| fitness(&reshape(p, n)?, rs, spec))
            .collect()
    };

    let mut pbest_fit = evaluate(&positions)?;
    let mut pbest_pos = positions.clone();
    // Strict `<` with in-order scans keeps ties at the lowest particle
    // index, both here and in the per-iteration update below.
    let mut gbest_fit = f64::INFINITY;
    let mut gbest_pos = Array1::zeros(dim);
    for (i, &fit) in pbest_fit.iter().enumerate() {
        if fit < gbest_fit {
            gbest_fit = fit;
            gbest_pos.assign(&pbest_pos[i]);
        }
    }
    let mut trace = vec![gbest_fit];

    for iter in 0..cfg.max_iters {
        // Inertia decays linearly so the final iteration uses inertiaEnd; a
        // single-iteration run just uses inertiaStart.
        let frac = if cfg.max_iters > 1 {
            iter as f64 / (cfg.max_iters - 1) as f64
        } else {
            0.0
        };
        let inertia = cfg.inertia_start - (cfg.inertia_start - cfg.inertia_end) * frac;

        for (position, (velocity, pbest)) in positions
            .iter_mut()
            .zip(velocities.iter_mut().zip(&pbest_pos))
        {
            for d in 0..dim {
                let r1: f64 = unit.sample(&mut rng);
                let r2: f64 = unit.sample(&mut rng);
                let v = inertia * velocity[d]
                    + cfg.accel1 * r1 * (pbest[d] - position[d])
                    + cfg.accel2 * r2 * (gbest_pos[d] - position[d]);
                velocity[d] = v.clamp(-VELOCITY_LIMIT, VELOCITY_LIMIT);
                position[d] = (position[d] + velocity[d]).clamp(-1.0, 1.0);
            }
        }

        let fits = evaluate(&positions)?;
        for (i, &fit) in fits.iter().enumerate() {
            if fit < pbest_fit[i] {
                pbest_fit[i] = fit;
                pbest_pos[i].assign(&positions[i]);
            }
            if fit < gbest_fit {
                gbest_fit = fit;
                gbest_pos.assign(&positions[i]);
            }
        }
        trace.push(gbest_fit);

        if trace.len() > STALL_WINDOW {
            let earlier = trace[trace.len() - 1 - STALL_WINDOW];
            if earlier - gbest_fit < cfg.min_error_grad {
                break;
            }
        }
    }

    Ok((reshape(&gbest_pos, n)?, trace))
}

/// Swarm-search the weight matrix that best reproduces the stored
/// sequences. See [`fitness`] for the score and [`PsoConfig`] for the
/// knobs; a fixed seed makes the result reproducible bit for bit.
pub fn pso_learn(
    rs: &ResponseSet,
    spec: &ActivationSpec,
    cfg: &PsoConfig,
) -> Result<WeightMatrix> {
    Ok(pso_learn_traced(rs, spec, cfg)?.0)
}
