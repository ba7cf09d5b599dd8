//! Experiment orchestration: random-search hyperparameter tuning,
//! leave-one-out cross-validation, and the full generate → corrupt → tune →
//! learn → evaluate pipeline with all artifacts written to a directory.
//!
//! Every randomized stage draws from its own sub-seed, derived from the
//! experiment's master seed, the trial index, and a fixed per-stage tag.
//! Rerunning with the same master seed therefore reproduces every artifact
//! byte for byte (timing numbers aside), regardless of thread scheduling:
//! random draws happen on one sequential stream per stage, and all parallel
//! reductions resolve ties deterministically.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{ActivationFamily, ActivationSpec};
use crate::datagen::{
    add_noise, default_prune_threshold, generate_fcm, generate_initials, generate_responses,
    NoiseSpec, RandomFcmSpec,
};
use crate::error::{Error, Result};
use crate::fcm::{simulate, ResponseSet, WeightMatrix};
use crate::io::{save_histogram_csv, save_timeseries_csv, save_weight_matrix, write_json};
use crate::learner::{learn, LearnConfig};
use crate::metrics::{
    aggregate, data_error, model_error, out_of_sample_error, ss_mean, AggregateReport,
    MetricsReport, LINK_THRESHOLD,
};
use crate::pso::{pso_learn, PsoConfig};

/// Per-stage tags for sub-seed derivation. Spacing the stages apart keeps
/// the scheme extensible without reshuffling existing streams.
const SEED_MAP: u64 = 0;
const SEED_INITIALS: u64 = 1;
const SEED_NOISE: u64 = 2;
const SEED_SEARCH: u64 = 3;
const SEED_EVAL: u64 = 4;
const SEED_PSO_LOO: u64 = 5;
const SEED_PSO_FULL: u64 = 6;

/// Mix a master seed, trial index, and stage tag into one sub-seed
/// (SplitMix64 finalizer). The scheme is part of the reproducibility
/// contract: the same inputs yield the same stream on every platform.
fn derive_seed(master: u64, trial: u64, stage: u64) -> u64 {
    let mut z = master
        .wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stage.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn default_alpha_range() -> (f64, f64) {
    (0.0, 0.3)
}
fn default_beta_range() -> (f64, f64) {
    (0.0, 0.5)
}
fn default_lambda_range() -> (f64, f64) {
    (0.0, 5.5)
}
fn default_budget() -> usize {
    200
}

/// Hyperparameter search domain: open intervals for the entropy weight, the
/// sparsity weight, and the activation steepness, plus the number of
/// uniform samples to try.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SearchSpace {
    #[serde(default = "default_alpha_range")]
    pub alpha_range: (f64, f64),
    #[serde(default = "default_beta_range")]
    pub beta_range: (f64, f64),
    #[serde(default = "default_lambda_range")]
    pub lambda_range: (f64, f64),
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Ignored by [`run_experiment`], which derives one per trial.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            alpha_range: default_alpha_range(),
            beta_range: default_beta_range(),
            lambda_range: default_lambda_range(),
            budget: default_budget(),
            seed: 0,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("alphaRange", self.alpha_range),
            ("betaRange", self.beta_range),
            ("lambdaRange", self.lambda_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must satisfy 0 <= low < high, got ({lo}, {hi})"
                )));
            }
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter(
                "search budget must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The winning hyperparameter triple, the matrix learned with it on the
/// full data, and that matrix's reproduction error.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub data_error: f64,
    pub weights: WeightMatrix,
}

fn sample_open(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let uniform = Uniform::new(lo, hi).expect("ranges validated as nonempty");
    // Uniform includes its lower bound; redraw the (measure-zero) endpoint
    // so every sample is strictly inside the open interval.
    loop {
        let v = uniform.sample(rng);
        if v > lo && v < hi {
            return v;
        }
    }
}

/// Uniform random hyperparameter search: draw `budget` (α, β, λ) triples —
/// in that order, from one sequential stream seeded by the space — fit the
/// full data with each, and keep the triple whose model reproduces the data
/// best. Ties go to the earliest-drawn triple. `base` supplies the
/// activation family and solver knobs; its α, β, λ are overridden per
/// candidate. Candidates are evaluated in parallel.
pub fn random_search(
    rs: &ResponseSet,
    space: &SearchSpace,
    base: &LearnConfig,
) -> Result<SearchOutcome> {
    space.validate()?;
    base.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    let triples: Vec<(f64, f64, f64)> = (0..space.budget)
        .map(|_| {
            let alpha = sample_open(&mut rng, space.alpha_range);
            let beta = sample_open(&mut rng, space.beta_range);
            let lambda = sample_open(&mut rng, space.lambda_range);
            (alpha, beta, lambda)
        })
        .collect();

    let family = base.activation.family;
    let mut evaluated: Vec<(f64, WeightMatrix)> = triples
        .par_iter()
        .map(|&(alpha, beta, lambda)| {
            let mut cfg = base.clone();
            cfg.alpha = alpha;
            cfg.beta = beta;
            cfg.activation = ActivationSpec::new(family, lambda)?;
            let w = learn(rs, &cfg)?;
            let err = data_error(rs, &w, &cfg.activation)?;
            Ok((err, w))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for i in 1..evaluated.len() {
        if evaluated[i].0 < evaluated[best].0 {
            best = i;
        }
    }
    let (alpha, beta, lambda) = triples[best];
    let (err, weights) = evaluated.swap_remove(best);
    Ok(SearchOutcome {
        alpha,
        beta,
        lambda,
        data_error: err,
        weights,
    })
}

/// Out-of-sample evaluation protocol: how many fresh initial vectors to
/// draw, how many steps to simulate, and the seed for the draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalSettings {
    pub initials: usize,
    pub steps: usize,
    pub seed: u64,
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.initials == 0 || self.steps == 0 {
            return Err(Error::InvalidParameter(
                "evaluation needs at least one initial vector and one step".into(),
            ));
        }
        Ok(())
    }
}

/// Per-fold reports plus their mean ± std reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct LooOutcome {
    pub folds: Vec<MetricsReport>,
    pub aggregate: AggregateReport,
}

/// Mean absolute free-run deviation from observed sequences; the
/// generalization score when no generating matrix is available, since a
/// held-out initial vector played no part in learning.
fn held_out_absolute_error(
    held: &ResponseSet,
    w: &WeightMatrix,
    spec: &ActivationSpec,
) -> Result<f64> {
    let k = held.k();
    let mut total = 0.0;
    for (initial, seq) in held.initials().iter().zip(held.sequences()) {
        let sim = simulate(initial, w, spec, k)?;
        total += (&sim - seq).mapv(f64::abs).sum();
    }
    Ok(total / (held.m() * k * held.n()) as f64)
}

/// Leave-one-out cross-validation: for every sequence `s`, train `learner`
/// on the other m−1 sequences (`learner` receives the fold index and the
/// training set) and score the result on the held-out sequence —
/// reproduction error from the held-out initial vector, plus weight-level
/// and structural comparisons when the generating `target` is known.
///
/// `spec` is the activation under which the learned matrices are simulated.
/// With a target, generalization is measured by simulating both matrices
/// from `eval.initials` fresh initial vectors for `eval.steps` steps;
/// without one, by the learned matrix's absolute deviation from the
/// held-out observations. Each fold's `execution_seconds` covers the
/// `learner` call alone. Folds run sequentially; the learners themselves
/// are free to parallelize internally.
pub fn leave_one_out<F>(
    rs: &ResponseSet,
    spec: &ActivationSpec,
    target: Option<&WeightMatrix>,
    eval: &EvalSettings,
    learner: F,
) -> Result<LooOutcome>
where
    F: Fn(usize, &ResponseSet) -> Result<WeightMatrix>,
{
    eval.validate()?;
    if rs.m() < 2 {
        return Err(Error::InvalidParameter(format!(
            "leave-one-out needs at least two sequences, got {}",
            rs.m()
        )));
    }
    let fresh = match target {
        Some(_) => Some(generate_initials(
            eval.initials,
            rs.n(),
            spec.family,
            eval.seed,
        )?),
        None => None,
    };

    let mut folds = Vec::with_capacity(rs.m());
    for s in 0..rs.m() {
        let train = rs.without_sequence(s)?;
        let held = rs.only_sequence(s)?;
        let started = Instant::now();
        let w = learner(s, &train)?;
        let execution_seconds = started.elapsed().as_secs_f64();

        let (oos, me, ss) = match (target, &fresh) {
            (Some(t), Some(initials)) => (
                out_of_sample_error(t, &w, spec, initials, eval.steps)?,
                Some(model_error(t, &w)?),
                Some(ss_mean(t, &w, LINK_THRESHOLD)?),
            ),
            _ => (held_out_absolute_error(&held, &w, spec)?, None, None),
        };
        folds.push(MetricsReport {
            data_error: data_error(&held, &w, spec)?,
            out_of_sample_error: oos,
            model_error: me,
            ss_mean: ss,
            execution_seconds,
        });
    }
    let aggregate = aggregate(&folds)?;
    Ok(LooOutcome { folds, aggregate })
}

/// Synthetic data recipe: a random sparse map plus the response set drawn
/// from it. Seeds are derived per trial by the experiment runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SyntheticMap {
    pub n: usize,
    pub density: f64,
    pub activation: ActivationSpec,
    #[serde(default = "default_prune_threshold")]
    pub prune_threshold: f64,
    /// Number of response sequences (m).
    pub sequences: usize,
    /// Steps per sequence (k).
    pub steps: usize,
}

impl SyntheticMap {
    fn validate(&self) -> Result<()> {
        RandomFcmSpec {
            n: self.n,
            density: self.density,
            activation: self.activation,
            seed: 0,
            prune_threshold: self.prune_threshold,
        }
        .validate()?;
        ActivationSpec::new(self.activation.family, self.activation.lambda)?;
        if self.sequences < 2 {
            return Err(Error::InvalidParameter(format!(
                "leave-one-out evaluation needs at least 2 sequences, got {}",
                self.sequences
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "sequences need at least 2 steps, got {}",
                self.steps
            )));
        }
        Ok(())
    }
}

/// Recorded data loaded from a time-series CSV; the activation family must
/// be stated because it cannot be inferred from observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExternalData {
    pub path: PathBuf,
    pub family: ActivationFamily,
}

/// Where a trial's data comes from: generated on the fly or read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSource {
    Synthetic(SyntheticMap),
    External(ExternalData),
}

/// Observation noise level; the seed is derived per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NoiseLevel {
    #[serde(default)]
    pub mu: f64,
    pub sigma: f64,
}

/// A full experiment: data source, optional observation noise, search
/// domain, trial count, and the out-of-sample evaluation sizes (defaulting
/// to the data's own m and k). The master seed arrives separately so that
/// reproducibility is an explicit choice at the call site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSource,
    #[serde(default)]
    pub noise: Option<NoiseLevel>,
    #[serde(default)]
    pub search: SearchSpace,
    pub trials: usize,
    /// Also run the particle swarm baseline under the identical protocol.
    #[serde(default)]
    pub compare_pso: bool,
    #[serde(default)]
    pub eval_initials: Option<usize>,
    #[serde(default)]
    pub eval_steps: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter(
                "an experiment needs at least one trial".into(),
            ));
        }
        match &self.map {
            MapSource::Synthetic(map) => map.validate()?,
            MapSource::External(_) => {}
        }
        if let Some(noise) = &self.noise {
            NoiseSpec {
                mu: noise.mu,
                sigma: noise.sigma,
                seed: 0,
            }
            .validate()?;
        }
        self.search.validate()?;
        if self.eval_initials == Some(0) || self.eval_steps == Some(0) {
            return Err(Error::InvalidParameter(
                "evalInitials and evalSteps must be at least 1 when given".into(),
            ));
        }
        Ok(())
    }
}

/// One trial's tuned hyperparameters and the tuned model's reproduction
/// error on the full data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SearchChoice {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub data_error: f64,
}

/// Cross-trial rollup: tuned hyperparameters per trial and, per method, the
/// mean ± std of the per-trial mean metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub search: Vec<SearchChoice>,
    pub lefcm: AggregateReport,
    pub pso: Option<AggregateReport>,
}

fn means_as_report(agg: &AggregateReport) -> MetricsReport {
    MetricsReport {
        data_error: agg.data_error_mean,
        out_of_sample_error: agg.out_of_sample_error_mean,
        model_error: agg.model_error_mean,
        ss_mean: agg.ss_mean_mean,
        execution_seconds: agg.execution_seconds_mean,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Run every trial of `cfg` and write all artifacts under `out_dir`:
/// `config.json` and `summary.json` at the top, and per trial — directly in
/// `out_dir` for a single trial, else in `trial_<t>/` — the noisy data
/// (`timeseries/<s>.csv`), the generator and its histogram (synthetic
/// runs), the tuned model (`search.json`, `learned_lefcm.json`,
/// `hist_lefcm.csv`), leave-one-out metrics (`metrics_lefcm.json`), and the
/// swarm baseline's counterparts when enabled.
///
/// A trial generates (or loads) data, corrupts it with noise, tunes
/// hyperparameters by random search on the full data, then reports
/// leave-one-out metrics for the tuned learner. The baseline is tuned by
/// nothing — it searches the weights directly under the generator's
/// activation (the tuned one for external data) — but is scored by the
/// identical protocol.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    master_seed: u64,
    out_dir: &Path,
) -> Result<ExperimentSummary> {
    cfg.validate()?;
    create_dir(out_dir)?;
    write_json(
        &out_dir.join("config.json"),
        &serde_json::json!({ "seed": master_seed, "experiment": cfg }),
    )?;

    let mut search_choices = Vec::with_capacity(cfg.trials);
    let mut lefcm_means = Vec::with_capacity(cfg.trials);
    let mut pso_means = Vec::with_capacity(cfg.trials);

    for trial in 0..cfg.trials {
        let dir = if cfg.trials == 1 {
            out_dir.to_path_buf()
        } else {
            out_dir.join(format!("trial_{trial}"))
        };
        create_dir(&dir.join("timeseries"))?;
        let t = trial as u64;

        let (rs, truth, generator_spec) = match &cfg.map {
            MapSource::Synthetic(map) => {
                let map_spec = RandomFcmSpec {
                    n: map.n,
                    density: map.density,
                    activation: map.activation,
                    seed: derive_seed(master_seed, t, SEED_MAP),
                    prune_threshold: map.prune_threshold,
                };
                let truth = generate_fcm(&map_spec)?;
                let initials = generate_initials(
                    map.sequences,
                    map.n,
                    map.activation.family,
                    derive_seed(master_seed, t, SEED_INITIALS),
                )?;
                let clean = generate_responses(&truth, &map.activation, &initials, map.steps)?;
                (clean, Some(truth), Some(map.activation))
            }
            MapSource::External(data) => {
                (crate::io::load_timeseries_csv(&data.path)?, None, None)
            }
        };
        let rs = match &cfg.noise {
            Some(noise) => add_noise(
                &rs,
                &NoiseSpec {
                    mu: noise.mu,
                    sigma: noise.sigma,
                    seed: derive_seed(master_seed, t, SEED_NOISE),
                },
            )?,
            None => rs,
        };
        let family = match &cfg.map {
            MapSource::Synthetic(map) => map.activation.family,
            MapSource::External(data) => data.family,
        };

        for s in 0..rs.m() {
            save_timeseries_csv(
                &dir.join("timeseries").join(format!("{s}.csv")),
                &rs.only_sequence(s)?,
                s,
            )?;
        }
        if let Some(truth) = &truth {
            save_weight_matrix(&dir.join("generator.json"), truth)?;
            save_histogram_csv(&dir.join("hist_generator.csv"), truth)?;
        }

        let base = LearnConfig::new(0.0, 0.0, ActivationSpec::new(family, 1.0)?)?;
        let space = SearchSpace {
            seed: derive_seed(master_seed, t, SEED_SEARCH),
            ..cfg.search.clone()
        };
        let search = random_search(&rs, &space, &base)?;
        let choice = SearchChoice {
            alpha: search.alpha,
            beta: search.beta,
            lambda: search.lambda,
            data_error: search.data_error,
        };
        write_json(&dir.join("search.json"), &choice)?;
        search_choices.push(choice);
        save_weight_matrix(&dir.join("learned_lefcm.json"), &search.weights)?;
        save_histogram_csv(&dir.join("hist_lefcm.csv"), &search.weights)?;

        let tuned_spec = ActivationSpec::new(family, search.lambda)?;
        let tuned = LearnConfig::new(search.alpha, search.beta, tuned_spec)?;
        let eval = EvalSettings {
            initials: cfg.eval_initials.unwrap_or(rs.m()),
            steps: cfg.eval_steps.unwrap_or(rs.k()),
            seed: derive_seed(master_seed, t, SEED_EVAL),
        };
        let lefcm = leave_one_out(&rs, &tuned_spec, truth.as_ref(), &eval, |_, train| {
            learn(train, &tuned)
        })?;
        write_json(&dir.join("metrics_lefcm.json"), &lefcm.aggregate)?;
        lefcm_means.push(means_as_report(&lefcm.aggregate));

        if cfg.compare_pso {
            let pso_spec = generator_spec.unwrap_or(tuned_spec);
            let full = pso_learn(
                &rs,
                &pso_spec,
                &PsoConfig::new(derive_seed(master_seed, t, SEED_PSO_FULL)),
            )?;
            save_weight_matrix(&dir.join("learned_pso.json"), &full)?;
            save_histogram_csv(&dir.join("hist_pso.csv"), &full)?;

            let loo_seed = derive_seed(master_seed, t, SEED_PSO_LOO);
            let pso_loo = leave_one_out(&rs, &pso_spec, truth.as_ref(), &eval, |fold, train| {
                pso_learn(
                    train,
                    &pso_spec,
                    &PsoConfig::new(derive_seed(loo_seed, fold as u64, 0)),
                )
            })?;
            write_json(&dir.join("metrics_pso.json"), &pso_loo.aggregate)?;
            pso_means.push(means_as_report(&pso_loo.aggregate));
        }
    }

    let summary = ExperimentSummary {
        trials: cfg.trials,
        search: search_choices,
        lefcm: aggregate(&lefcm_means)?,
        pso: if pso_means.is_empty() {
            None
        } else {
            Some(aggregate(&pso_means)?)
        },
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}
