//! Cross-module flows that no single unit suite covers: hyperparameter
//! search on clean data landing in the identifiable steepness regime, the
//! gene-expression-shaped TSV import, and an experiment over external data
//! where no generating map exists to score against.

use std::fmt::Write as _;

use fcmlearn::datagen::{generate_fcm, generate_initials, generate_responses, RandomFcmSpec};
use fcmlearn::harness::{ExperimentConfig, ExternalData, MapSource, SearchSpace};
use fcmlearn::io::{load_timestamped_tsv, save_timeseries_csv};
use fcmlearn::{random_search, run_experiment, ActivationFamily, ActivationSpec, LearnConfig};

/// On noise-free data the steepness is only identifiable up to the scaling
/// `(λ, w) → (λ', λw/λ')`, which stays inside the unit box for any λ' above
/// λ·max|w|; every such pair reproduces the data exactly. The search should
/// therefore land in that equivalent regime — high steepness, near-zero
/// reproduction error — rather than on any single magic value.
#[test]
fn search_on_clean_data_lands_in_the_identifiable_regime() {
    let spec = ActivationSpec::sigmoid(5.0).unwrap();
    let truth = generate_fcm(&RandomFcmSpec {
        n: 20,
        density: 0.2,
        activation: spec,
        seed: 1,
        prune_threshold: 0.05,
    })
    .unwrap();
    let initials = generate_initials(5, 20, ActivationFamily::Sigmoid, 2).unwrap();
    let rs = generate_responses(&truth, &spec, &initials, 100).unwrap();

    let space = SearchSpace {
        seed: 1,
        ..SearchSpace::default()
    };
    let base = LearnConfig::new(0.0, 0.0, ActivationSpec::sigmoid(1.0).unwrap()).unwrap();
    let winner = random_search(&rs, &space, &base).unwrap();
    assert!(
        winner.lambda > 4.0,
        "winning steepness {} fell below the identifiable regime",
        winner.lambda
    );
    assert!(
        winner.data_error < 1e-3,
        "winning data error {} is far from a clean-data fit",
        winner.data_error
    );
}

/// A gene-expression-style export: a time column and one column per gene,
/// ten recordings of twenty-one samples concatenated, each restarting the
/// clock. The first sample of each block is the initial state, leaving
/// twenty observed transitions.
#[test]
fn gene_expression_shaped_tsv_imports_with_the_expected_shape() {
    let (blocks, samples, genes) = (10, 21, 100);
    let mut text = String::from("Time");
    for g in 1..=genes {
        write!(text, "\tG{g}").unwrap();
    }
    text.push('\n');
    for b in 0..blocks {
        for s in 0..samples {
            write!(text, "{}", s * 50).unwrap();
            for g in 0..genes {
                // Deterministic, smooth, and strictly inside (0, 1).
                let v = 0.5 + 0.4 * f64::sin((b * genes + g) as f64 + s as f64 / 3.0);
                write!(text, "\t{v:.6}").unwrap();
            }
            text.push('\n');
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expression.tsv");
    std::fs::write(&path, text).unwrap();

    let rs = load_timestamped_tsv(&path).unwrap();
    assert_eq!(rs.m(), 10);
    assert_eq!(rs.k(), 20);
    assert_eq!(rs.n(), 100);
    for init in rs.initials() {
        assert!(init.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

/// Without a generating map the harness can still tune, fit, and report
/// reproduction errors — the weight-level metrics simply stay empty.
#[test]
fn external_data_experiment_reports_without_weight_metrics() {
    let spec = ActivationSpec::sigmoid(2.0).unwrap();
    let truth = generate_fcm(&RandomFcmSpec {
        n: 6,
        density: 0.4,
        activation: spec,
        seed: 21,
        prune_threshold: 0.05,
    })
    .unwrap();
    let initials = generate_initials(3, 6, ActivationFamily::Sigmoid, 22).unwrap();
    let rs = generate_responses(&truth, &spec, &initials, 15).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("observed.csv");
    save_timeseries_csv(&data_path, &rs, 0).unwrap();

    let cfg = ExperimentConfig {
        map: MapSource::External(ExternalData {
            path: data_path,
            family: ActivationFamily::Sigmoid,
        }),
        noise: None,
        search: SearchSpace {
            budget: 5,
            ..SearchSpace::default()
        },
        trials: 2,
        compare_pso: false,
        eval_initials: None,
        eval_steps: None,
    };
    let out = dir.path().join("run");
    let summary = run_experiment(&cfg, 17, &out).unwrap();

    assert_eq!(summary.trials, 2);
    assert!(summary.lefcm.model_error_mean.is_none());
    assert!(summary.lefcm.ss_mean_mean.is_none());
    assert!(summary.lefcm.data_error_mean.is_finite());
    assert!(summary.pso.is_none());

    for trial in ["trial_0", "trial_1"] {
        assert!(!out.join(trial).join("generator.json").exists());
        assert!(!out.join(trial).join("hist_generator.csv").exists());
        let metrics: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join(trial).join("metrics_lefcm.json")).unwrap())
                .unwrap();
        assert!(metrics["modelErrorMean"].is_null());
        assert!(metrics["ssMeanMean"].is_null());
        assert!(metrics["dataErrorMean"].is_number());
        assert!(out.join(trial).join("timeseries/0.csv").exists());
    }
}
