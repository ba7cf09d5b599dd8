//! Command-line front end. Subcommands mirror the library's pipeline
//! stages: `generate` synthesizes benchmark data, `learn` and `pso` fit a
//! map, `evaluate` scores one, `search` tunes hyperparameters, `experiment`
//! runs the whole protocol from a config file, and `convert` imports
//! foreign TSV exports.
//!
//! Results go to files; each subcommand prints one compact JSON line of
//! key numbers to stdout. Exit codes: 0 success, 2 configuration error,
//! 3 data error, 4 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fcmlearn::datagen::{
    add_noise, generate_fcm, generate_initials, generate_responses, NoiseSpec, RandomFcmSpec,
};
use fcmlearn::harness::{random_search, run_experiment, ExperimentConfig, SearchSpace};
use fcmlearn::io::{
    load_timeseries_csv, load_timestamped_tsv, load_weight_matrix, read_json, save_histogram_csv,
    save_timeseries_csv, save_weight_matrix,
};
use fcmlearn::metrics::{data_error, model_error, out_of_sample_error, ss_mean, LINK_THRESHOLD};
use fcmlearn::{
    learn, pso_learn, ActivationFamily, ActivationSpec, Error, LearnConfig, PsoConfig,
    ResponseSet, Result,
};

#[derive(Parser)]
#[command(
    name = "fcmlearn",
    version,
    about = "Learn fuzzy cognitive maps from noisy time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random map and simulated response sequences
    Generate(GenerateArgs),
    /// Recover a weight matrix from observed sequences
    Learn(LearnArgs),
    /// Fit a weight matrix with the particle swarm baseline
    Pso(PsoArgs),
    /// Score a learned matrix against data and, optionally, its generator
    Evaluate(EvaluateArgs),
    /// Tune alpha, beta, and lambda by uniform random search
    Search(SearchArgs),
    /// Run a full experiment from a config file
    Experiment(ExperimentArgs),
    /// Convert a timestamped TSV export to the canonical CSV layout
    Convert(ConvertArgs),
}

#[derive(Args)]
struct ActivationArgs {
    /// Squashing family: sigmoid or tanh
    #[arg(long)]
    family: ActivationFamily,
    /// Steepness of the squashing function
    #[arg(long)]
    lambda: f64,
}

impl ActivationArgs {
    fn spec(&self) -> Result<ActivationSpec> {
        ActivationSpec::new(self.family, self.lambda)
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of nodes
    #[arg(long)]
    nodes: usize,
    /// Fraction of nonzero weights
    #[arg(long)]
    density: f64,
    #[command(flatten)]
    activation: ActivationArgs,
    /// Number of response sequences
    #[arg(long)]
    sequences: usize,
    /// Transitions per sequence (the initial state comes on top)
    #[arg(long)]
    steps: usize,
    /// Master seed; the map draws from it, initial vectors from seed+1,
    /// noise from seed+2
    #[arg(long)]
    seed: u64,
    /// Gaussian noise sigma added to every observation (omit for clean data)
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Gaussian noise mean
    #[arg(long, default_value_t = 0.0)]
    noise_mu: f64,
    /// Drawn weights below this magnitude become exact zeros
    #[arg(long, default_value_t = 0.05)]
    prune_threshold: f64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    /// Time-series CSV file, or a directory of them
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    activation: ActivationArgs,
    /// Entropy bonus weight
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Sparsity penalty weight
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Where to write the learned weights
    #[arg(long)]
    out: PathBuf,
    /// Also write the learned weights' histogram CSV here
    #[arg(long)]
    hist: Option<PathBuf>,
}

#[derive(Args)]
struct PsoArgs {
    /// Time-series CSV file, or a directory of them
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    activation: ActivationArgs,
    /// Seed for swarm initialization and velocity updates
    #[arg(long)]
    seed: u64,
    /// Swarm size
    #[arg(long, default_value_t = 20)]
    population: usize,
    /// Iteration budget
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Where to write the learned weights
    #[arg(long)]
    out: PathBuf,
    /// Also write the learned weights' histogram CSV here
    #[arg(long)]
    hist: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Time-series CSV file, or a directory of them
    #[arg(long)]
    data: PathBuf,
    /// Learned weight matrix JSON
    #[arg(long)]
    weights: PathBuf,
    #[command(flatten)]
    activation: ActivationArgs,
    /// Generating weight matrix JSON; enables the weight-level metrics
    #[arg(long)]
    target: Option<PathBuf>,
    /// Fresh initial vectors for the out-of-sample run (default: data's m)
    #[arg(long)]
    initials: Option<usize>,
    /// Steps for the out-of-sample run (default: data's k)
    #[arg(long)]
    steps: Option<usize>,
    /// Seed for the fresh initial vectors
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SearchArgs {
    /// Time-series CSV file, or a directory of them
    #[arg(long)]
    data: PathBuf,
    /// Squashing family; the steepness comes out of the search
    #[arg(long)]
    family: ActivationFamily,
    /// Entropy-weight interval, as `low,high`
    #[arg(long, value_parser = parse_interval, default_value = "0,0.3")]
    alpha_range: (f64, f64),
    /// Sparsity-weight interval, as `low,high`
    #[arg(long, value_parser = parse_interval, default_value = "0,0.5")]
    beta_range: (f64, f64),
    /// Steepness interval, as `low,high`
    #[arg(long, value_parser = parse_interval, default_value = "0,5.5")]
    lambda_range: (f64, f64),
    /// Number of uniform samples
    #[arg(long, default_value_t = 200)]
    budget: usize,
    /// Seed for the sampled triples
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the winning weights (omit to only print the triple)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON
    #[arg(long)]
    config: PathBuf,
    /// Master seed; every trial and stage derives its own stream from it
    #[arg(long)]
    seed: u64,
    /// Output directory for all artifacts
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    /// Timestamped TSV export to import
    #[arg(long)]
    input: PathBuf,
    /// Canonical CSV destination
    #[arg(long)]
    out: PathBuf,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `low,high`, got `{s}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{v}` is not a number"))
    };
    Ok((parse(lo)?, parse(hi)?))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
    }
    Ok(())
}

/// Load a single CSV, or merge every `.csv` in a directory (in numeric
/// file-name order, so `timeseries/0.csv, 1.csv, …` keeps its sequence
/// order) into one response set.
fn load_data(path: &Path) -> Result<ResponseSet> {
    if !path.is_dir() {
        return load_timeseries_csv(path);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| io_err(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    if files.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no .csv files found in {}",
            path.display()
        )));
    }
    files.sort_by_key(|p| {
        let stem = p
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let num = stem.parse::<u64>().ok();
        (num.is_none(), num, stem)
    });
    let mut initials = Vec::new();
    let mut sequences = Vec::new();
    for file in &files {
        let rs = load_timeseries_csv(file)?;
        initials.extend_from_slice(rs.initials());
        sequences.extend_from_slice(rs.sequences());
    }
    ResponseSet::new(initials, sequences)
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn generate(args: GenerateArgs) -> Result<()> {
    let spec = args.activation.spec()?;
    let map_spec = RandomFcmSpec {
        n: args.nodes,
        density: args.density,
        activation: spec,
        seed: args.seed,
        prune_threshold: args.prune_threshold,
    };
    let truth = generate_fcm(&map_spec)?;
    let initials = generate_initials(
        args.sequences,
        args.nodes,
        spec.family,
        args.seed.wrapping_add(1),
    )?;
    let mut rs = generate_responses(&truth, &spec, &initials, args.steps)?;
    if let Some(sigma) = args.noise_sigma {
        rs = add_noise(
            &rs,
            &NoiseSpec {
                mu: args.noise_mu,
                sigma,
                seed: args.seed.wrapping_add(2),
            },
        )?;
    }

    let series_dir = args.out.join("timeseries");
    fs::create_dir_all(&series_dir).map_err(|e| io_err(&series_dir, e))?;
    save_weight_matrix(&args.out.join("generator.json"), &truth)?;
    save_histogram_csv(&args.out.join("hist_generator.csv"), &truth)?;
    for s in 0..rs.m() {
        save_timeseries_csv(&series_dir.join(format!("{s}.csv")), &rs.only_sequence(s)?, s)?;
    }
    print_json(&json!({
        "nodes": rs.n(),
        "sequences": rs.m(),
        "steps": rs.k(),
        "links": truth.weights().iter().filter(|v| **v != 0.0).count(),
    }));
    Ok(())
}

fn learn_cmd(args: LearnArgs) -> Result<()> {
    let rs = load_data(&args.data)?;
    let cfg = LearnConfig::new(args.alpha, args.beta, args.activation.spec()?)?;
    let started = Instant::now();
    let w = learn(&rs, &cfg)?;
    let execution_seconds = started.elapsed().as_secs_f64();
    ensure_parent(&args.out)?;
    save_weight_matrix(&args.out, &w)?;
    if let Some(hist) = &args.hist {
        ensure_parent(hist)?;
        save_histogram_csv(hist, &w)?;
    }
    print_json(&json!({
        "dataError": data_error(&rs, &w, &cfg.activation)?,
        "executionSeconds": execution_seconds,
    }));
    Ok(())
}

fn pso_cmd(args: PsoArgs) -> Result<()> {
    let rs = load_data(&args.data)?;
    let spec = args.activation.spec()?;
    let mut cfg = PsoConfig::new(args.seed);
    cfg.population_size = args.population;
    cfg.max_iters = args.iters;
    let started = Instant::now();
    let w = pso_learn(&rs, &spec, &cfg)?;
    let execution_seconds = started.elapsed().as_secs_f64();
    ensure_parent(&args.out)?;
    save_weight_matrix(&args.out, &w)?;
    if let Some(hist) = &args.hist {
        ensure_parent(hist)?;
        save_histogram_csv(hist, &w)?;
    }
    print_json(&json!({
        "dataError": data_error(&rs, &w, &spec)?,
        "executionSeconds": execution_seconds,
    }));
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let rs = load_data(&args.data)?;
    let w = load_weight_matrix(&args.weights)?;
    let spec = args.activation.spec()?;
    let mut report = serde_json::Map::new();
    report.insert("dataError".into(), json!(data_error(&rs, &w, &spec)?));
    if let Some(target_path) = &args.target {
        let target = load_weight_matrix(target_path)?;
        let fresh = generate_initials(
            args.initials.unwrap_or(rs.m()),
            rs.n(),
            spec.family,
            args.seed,
        )?;
        let steps = args.steps.unwrap_or(rs.k());
        report.insert(
            "outOfSampleError".into(),
            json!(out_of_sample_error(&target, &w, &spec, &fresh, steps)?),
        );
        report.insert("modelError".into(), json!(model_error(&target, &w)?));
        report.insert(
            "ssMean".into(),
            json!(ss_mean(&target, &w, LINK_THRESHOLD)?),
        );
    }
    print_json(&serde_json::Value::Object(report));
    Ok(())
}

fn search(args: SearchArgs) -> Result<()> {
    let rs = load_data(&args.data)?;
    let space = SearchSpace {
        alpha_range: args.alpha_range,
        beta_range: args.beta_range,
        lambda_range: args.lambda_range,
        budget: args.budget,
        seed: args.seed,
    };
    let base = LearnConfig::new(0.0, 0.0, ActivationSpec::new(args.family, 1.0)?)?;
    let outcome = random_search(&rs, &space, &base)?;
    if let Some(out) = &args.out {
        ensure_parent(out)?;
        save_weight_matrix(out, &outcome.weights)?;
    }
    print_json(&json!({
        "alpha": outcome.alpha,
        "beta": outcome.beta,
        "lambda": outcome.lambda,
        "dataError": outcome.data_error,
    }));
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let cfg: ExperimentConfig = read_json(&args.config)?;
    let summary = run_experiment(&cfg, args.seed, &args.out)?;
    print_json(&serde_json::to_value(&summary).expect("summary serializes"));
    Ok(())
}

fn convert(args: ConvertArgs) -> Result<()> {
    let rs = load_timestamped_tsv(&args.input)?;
    ensure_parent(&args.out)?;
    save_timeseries_csv(&args.out, &rs, 0)?;
    print_json(&json!({
        "nodes": rs.n(),
        "sequences": rs.m(),
        "steps": rs.k(),
    }));
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Learn(args) => learn_cmd(args),
        Command::Pso(args) => pso_cmd(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Search(args) => search(args),
        Command::Experiment(args) => experiment(args),
        Command::Convert(args) => convert(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
