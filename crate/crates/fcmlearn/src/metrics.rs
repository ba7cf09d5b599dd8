//! Evaluation metrics for learned maps: reproduction of the training
//! sequences, generalization to unseen initial states, weight-level accuracy
//! against a known generator, and structural (link/no-link) agreement. A
//! [`MetricsReport`] bundles one trial's numbers; [`aggregate`] reduces many
//! trials to per-metric mean and standard deviation.

use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};
use crate::fcm::{simulate, ResponseSet, StateVector, WeightMatrix};

/// Magnitude above which a weight counts as a link when comparing structure.
/// The comparison is strict, so an entry exactly at the threshold is treated
/// as no-link.
pub const LINK_THRESHOLD: f64 = 0.05;

/// Link/no-link agreement counts between a target and a learned matrix.
///
/// Zero weights are the positive class: `true_pos` counts positions that are
/// no-link in both matrices, `true_neg` positions that are links in both,
/// `false_pos` links of the target reported as no-link, and `false_neg`
/// no-links of the target reported as links. This inverts the everyday
/// convention where the rare class is positive — callers comparing against
/// other tooling should translate accordingly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    /// TN / (TN + FP): the fraction of target links kept as links.
    /// An empty denominator yields 0.
    pub fn specificity(&self) -> f64 {
        ratio(self.true_neg, self.true_neg + self.false_pos)
    }

    /// TP / (TP + FN): the fraction of target no-links kept as no-links.
    /// An empty denominator yields 0.
    pub fn sensitivity(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    /// Harmonic mean of specificity and sensitivity, 0 when both vanish.
    pub fn ss(&self) -> f64 {
        let spec = self.specificity();
        let sens = self.sensitivity();
        if spec + sens == 0.0 {
            0.0
        } else {
            2.0 * spec * sens / (spec + sens)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_same_n(target: &WeightMatrix, learned: &WeightMatrix) -> Result<()> {
    if target.n() != learned.n() {
        return Err(Error::DimensionMismatch(format!(
            "target has {} nodes but learned matrix has {}",
            target.n(),
            learned.n()
        )));
    }
    Ok(())
}

/// Classify every weight position of both matrices as link (magnitude
/// strictly above `threshold`) or no-link and tally the agreement. The four
/// counts always sum to n².
pub fn confusion_counts(
    target: &WeightMatrix,
    learned: &WeightMatrix,
    threshold: f64,
) -> Result<ConfusionCounts> {
    check_same_n(target, learned)?;
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "link threshold must be finite and nonnegative, got {threshold}"
        )));
    }
    let mut counts = ConfusionCounts {
        true_pos: 0,
        true_neg: 0,
        false_pos: 0,
        false_neg: 0,
    };
    for (t, l) in target.weights().iter().zip(learned.weights()) {
        let target_link = t.abs() > threshold;
        let learned_link = l.abs() > threshold;
        match (target_link, learned_link) {
            (false, false) => counts.true_pos += 1,
            (true, true) => counts.true_neg += 1,
            (true, false) => counts.false_pos += 1,
            (false, true) => counts.false_neg += 1,
        }
    }
    Ok(counts)
}

/// Mean squared error between the stored sequences and the sequences the
/// learned matrix generates from the same stored initial vectors: the
/// squared differences over all m·k·n positions, averaged.
pub fn data_error(
    target: &ResponseSet,
    learned: &WeightMatrix,
    spec: &ActivationSpec,
) -> Result<f64> {
    if target.n() != learned.n() {
        return Err(Error::DimensionMismatch(format!(
            "response set has {} nodes but learned matrix has {}",
            target.n(),
            learned.n()
        )));
    }
    let k = target.k();
    let mut total = 0.0;
    for (initial, seq) in target.initials().iter().zip(target.sequences()) {
        let generated = simulate(initial, learned, spec, k)?;
        total += (&generated - seq).mapv(|d| d * d).sum();
    }
    Ok(total / (target.m() * k * target.n()) as f64)
}

/// Mean absolute difference between the trajectories of two maps started
/// from the same fresh initial vectors — initial states that played no part
/// in learning — over all m·k·n positions.
pub fn out_of_sample_error(
    target: &WeightMatrix,
    learned: &WeightMatrix,
    spec: &ActivationSpec,
    initials: &[StateVector],
    k: usize,
) -> Result<f64> {
    check_same_n(target, learned)?;
    if initials.is_empty() {
        return Err(Error::InvalidParameter(
            "out-of-sample evaluation needs at least one initial vector".into(),
        ));
    }
    let mut total = 0.0;
    for initial in initials {
        let reference = simulate(initial, target, spec, k)?;
        let generated = simulate(initial, learned, spec, k)?;
        total += (&generated - &reference).mapv(f64::abs).sum();
    }
    Ok(total / (initials.len() * k * target.n()) as f64)
}

/// Mean absolute difference between the two weight matrices over all n²
/// entries. Symmetric in its arguments.
pub fn model_error(target: &WeightMatrix, learned: &WeightMatrix) -> Result<f64> {
    check_same_n(target, learned)?;
    let n = target.n();
    let total: f64 = target
        .weights()
        .iter()
        .zip(learned.weights())
        .map(|(t, l)| (t - l).abs())
        .sum();
    Ok(total / (n * n) as f64)
}

/// Structural agreement score: binarize both matrices at `threshold` and
/// return the harmonic mean of specificity and sensitivity of the resulting
/// link/no-link classification (see [`ConfusionCounts`] for the class
/// convention). Always in [0, 1].
pub fn ss_mean(target: &WeightMatrix, learned: &WeightMatrix, threshold: f64) -> Result<f64> {
    Ok(confusion_counts(target, learned, threshold)?.ss())
}

/// One trial's evaluation numbers. `model_error` and `ss_mean` need the
/// generating matrix and are absent when no ground truth exists.
/// `execution_seconds` is the wall-clock time of the learning call alone,
/// excluding data loading and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MetricsReport {
    pub data_error: f64,
    pub out_of_sample_error: f64,
    pub model_error: Option<f64>,
    pub ss_mean: Option<f64>,
    pub execution_seconds: f64,
}

/// Per-metric mean and standard deviation over a set of trials, flattened
/// into paired fields. The optional metrics stay optional: they aggregate
/// only when every trial reports them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AggregateReport {
    pub trials: usize,
    pub data_error_mean: f64,
    pub data_error_std: f64,
    pub out_of_sample_error_mean: f64,
    pub out_of_sample_error_std: f64,
    pub model_error_mean: Option<f64>,
    pub model_error_std: Option<f64>,
    pub ss_mean_mean: Option<f64>,
    pub ss_mean_std: Option<f64>,
    pub execution_seconds_mean: f64,
    pub execution_seconds_std: f64,
}

/// Sample mean and sample (n−1 denominator) standard deviation; a single
/// observation has standard deviation 0.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    (mean, var.sqrt())
}

/// Reduce per-trial reports to mean ± standard deviation per metric.
///
/// Every trial must report the same set of metrics: mixing trials with and
/// without ground-truth numbers would silently average over different
/// denominators, so it is rejected instead.
pub fn aggregate(trials: &[MetricsReport]) -> Result<AggregateReport> {
    if trials.is_empty() {
        return Err(Error::InvalidParameter(
            "aggregation needs at least one trial".into(),
        ));
    }
    let has_model = trials[0].model_error.is_some();
    let has_ss = trials[0].ss_mean.is_some();
    for (idx, trial) in trials.iter().enumerate() {
        if trial.model_error.is_some() != has_model || trial.ss_mean.is_some() != has_ss {
            return Err(Error::InvalidParameter(format!(
                "trial {idx} reports a different set of metrics than trial 0"
            )));
        }
    }

    let collect = |f: fn(&MetricsReport) -> f64| -> Vec<f64> { trials.iter().map(f).collect() };
    let (data_mean, data_std) = mean_std(&collect(|t| t.data_error));
    let (oos_mean, oos_std) = mean_std(&collect(|t| t.out_of_sample_error));
    let (exec_mean, exec_std) = mean_std(&collect(|t| t.execution_seconds));
    let (model_mean, model_std) = if has_model {
        let (m, s) = mean_std(&collect(|t| t.model_error.unwrap()));
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    let (ss_mean_val, ss_std) = if has_ss {
        let (m, s) = mean_std(&collect(|t| t.ss_mean.unwrap()));
        (Some(m), Some(s))
    } else {
        (None, None)
    };

    Ok(AggregateReport {
        trials: trials.len(),
        data_error_mean: data_mean,
        data_error_std: data_std,
        out_of_sample_error_mean: oos_mean,
        out_of_sample_error_std: oos_std,
        model_error_mean: model_mean,
        model_error_std: model_std,
        ss_mean_mean: ss_mean_val,
        ss_mean_std: ss_std,
        execution_seconds_mean: exec_mean,
        execution_seconds_std: exec_std,
    })
}
