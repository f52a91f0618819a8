use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;

use scconf::experiment::{self, ExperimentConfig, ResultTable};
use scconf::io;
use scconf::ratio::{self, Bandwidth, BregmanConfig, RatioModel, Ridge};
use scconf::risk::{ClassSet, EstimatorKind};
use scconf::rng::{derive_seed, seeded};
use scconf::synthetic::{GaussianMixtureSpec, Noise};
use scconf::trainer::{self, AnalyticRatio, DensityRatio, TrainConfig, WeightedSet};
use scconf::{Error, Mlp};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_ALL_DIVERGED: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

/// Learning from single-class or subset data with confidences.
#[derive(Parser)]
#[command(name = "scconf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a confidence dataset, unlabelled data and a labelled test set.
    Generate(GenerateArgs),
    /// Fit a density-ratio model from conditional and unlabelled CSVs.
    FitRatio(FitRatioArgs),
    /// Train a classifier on a confidence CSV.
    Train(TrainArgs),
    /// Accuracy of a trained model on a labelled CSV.
    Evaluate(EvaluateArgs),
    /// Run an estimator × n × seed grid and aggregate it.
    Experiment(ExperimentArgs),
    /// Re-aggregate the trial records of a finished run.
    Report(ReportArgs),
}

#[derive(Args)]
struct WorldArgs {
    /// Mixture spec JSON (built-in benchmark when omitted).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// 1-based class or comma-separated subset, e.g. `3` or `1,3`.
    #[arg(long, default_value = "3")]
    conditioning: String,
}

impl WorldArgs {
    fn load(&self) -> Result<(GaussianMixtureSpec, ClassSet), Error> {
        let spec = match &self.spec {
            Some(p) => GaussianMixtureSpec::from_json(&io::read_string(p)?)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => GaussianMixtureSpec::default_benchmark(),
        };
        let set = experiment::parse_conditioning(&self.conditioning)?;
        set.check(spec.num_classes())?;
        Ok((spec, set))
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "clean")]
    noise: Noise,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Unlabelled sample size (defaults to n).
    #[arg(long)]
    n_unlabeled: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    n_test: usize,
    /// Output directory for confidence.csv, unlabeled.csv and test.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitRatioArgs {
    /// Confidence CSV drawn from the conditional distribution.
    #[arg(long)]
    conditional: PathBuf,
    #[arg(long)]
    unlabeled: PathBuf,
    #[arg(long, default_value_t = 100)]
    max_centers: usize,
    /// Fixed kernel width (median heuristic when omitted).
    #[arg(long, conflicts_with = "cv")]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 1e-3, conflicts_with = "cv")]
    lambda: f64,
    /// Choose bandwidth and ridge by 5-fold cross-validation.
    #[arg(long)]
    cv: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    world: WorldArgs,
    /// Confidence CSV (`x0..,r0..`).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "sc_conf")]
    estimator: String,
    /// Fitted ratio JSON, for the NoRSC estimators.
    #[arg(long, conflicts_with = "analytic_ratio")]
    ratio: Option<PathBuf>,
    /// Use the exact density ratio of the spec.
    #[arg(long)]
    analytic_ratio: bool,
    #[arg(long, default_value_t = scconf::risk::DEFAULT_FLOOR)]
    floor: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    /// Hidden widths, comma separated.
    #[arg(long, default_value = "64,64", value_delimiter = ',')]
    hidden: Vec<usize>,
    /// Fraction of rows held out for model selection.
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model JSON to write; the training report goes to stdout.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labelled CSV (`x0..,y`, 1-based y).
    #[arg(long)]
    data: PathBuf,
    /// Also report the expected excess error over the Bayes rule of this spec.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Base config JSON; flags and --set override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Repeatable; `3` or `1,3` (1-based).
    #[arg(long)]
    conditioning: Vec<String>,
    #[arg(long)]
    noise: Option<Noise>,
    /// Repeatable or comma separated.
    #[arg(long, value_delimiter = ',')]
    estimator: Vec<String>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// `0..10` or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    analytic_ratio: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    analytic_confidence: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    match_n: Option<bool>,
    #[arg(long)]
    floor: Option<f64>,
    /// Dotted `key=value` config overrides, JSON valued.
    #[arg(long = "set")]
    sets: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory containing `trials/`.
    run: PathBuf,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config(format!("`{s}` is not a seed list or range like 0..10"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

fn generate(a: GenerateArgs) -> Result<u8, Error> {
    let (spec, set) = a.world.load()?;
    if a.n == 0 || a.n_test == 0 || a.n_unlabeled == Some(0) {
        return Err(Error::Argument("sample sizes must be positive".into()));
    }
    let data = spec.build_confidence_dataset(&set, a.n, a.noise, derive_seed(a.seed, 1))?;
    let unlabeled: Vec<Vec<f64>> = spec
        .sample_joint(a.n_unlabeled.unwrap_or(a.n), derive_seed(a.seed, 2))?
        .into_iter()
        .map(|(x, _)| x)
        .collect();
    let test = spec.sample_joint(a.n_test, derive_seed(a.seed, 3))?;
    io::write_confidence_csv(a.out.join("confidence.csv"), &data)?;
    io::write_unlabeled_csv(a.out.join("unlabeled.csv"), &unlabeled)?;
    io::write_labeled_csv(a.out.join("test.csv"), &test)?;
    println!("wrote {}", a.out.display());
    Ok(0)
}

fn fit_ratio(a: FitRatioArgs) -> Result<u8, Error> {
    let sc = io::read_instances_csv(&a.conditional)?;
    let u = io::read_unlabeled_csv(&a.unlabeled)?;
    let cfg = if a.cv {
        BregmanConfig {
            max_centers: a.max_centers,
            ..BregmanConfig::cross_validated()
        }
    } else {
        BregmanConfig {
            max_centers: a.max_centers,
            bandwidth: a
                .bandwidth
                .map_or(Bandwidth::MedianHeuristic, Bandwidth::Fixed),
            ridge: Ridge::Fixed { lambda: a.lambda },
        }
    };
    let model = ratio::fit_ratio(&sc, &u, &cfg, a.seed)?;
    io::write_string(&a.out, &model.to_json()?)?;
    let objective = ratio::empirical_bregman(&model, &sc, &u)?;
    println!(
        "{}",
        serde_json::json!({"sigma": model.sigma, "centers": model.centers.len(), "bregman": objective})
    );
    Ok(0)
}

fn train(a: TrainArgs) -> Result<u8, Error> {
    let (spec, set) = a.world.load()?;
    let estimator = EstimatorKind::parse(&a.estimator, &set)?;
    if estimator == EstimatorKind::Supervised {
        return Err(Error::Config(
            "the supervised estimator needs labelled data; use `experiment`".into(),
        ));
    }
    let data = io::read_confidence_csv(&a.data, set.clone(), Noise::Clean)?;
    if data.num_classes() != spec.num_classes() {
        return Err(Error::Config(format!(
            "data have {} classes but the spec has {}",
            data.num_classes(),
            spec.num_classes()
        )));
    }
    let fitted;
    let analytic;
    let ratio: Option<&dyn DensityRatio> = if a.analytic_ratio {
        analytic = AnalyticRatio {
            spec: &spec,
            subset: set.clone(),
        };
        Some(&analytic)
    } else if let Some(p) = &a.ratio {
        fitted = RatioModel::from_json(&io::read_string(p)?)?;
        Some(&fitted)
    } else {
        None
    };
    let weights = trainer::precompute_weights(&data, &estimator, ratio, a.floor)?;

    if !(a.val_fraction > 0.0 && a.val_fraction < 1.0) {
        return Err(Error::Argument("val_fraction must lie in (0, 1)".into()));
    }
    let n = data.len();
    let n_val = ((n as f64 * a.val_fraction).round() as usize).max(1);
    if n_val >= n {
        return Err(Error::Argument(format!(
            "{n} rows are too few to hold out a validation split"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(derive_seed(a.seed, 3)));
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<_>) {
        idx.iter()
            .map(|&i| (data.instances[i].clone(), weights[i].clone()))
            .unzip()
    };
    let (vx, vw) = pick(&order[..n_val]);
    let (tx, tw) = pick(&order[n_val..]);
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size.min(tx.len()),
        lr: a.lr,
        weight_decay: a.weight_decay,
        seed: a.seed,
        hidden: a.hidden,
        floor: a.floor,
        report_every: 0,
    };
    let (model, report) = trainer::train(
        WeightedSet::new(&tx, &tw)?,
        WeightedSet::new(&vx, &vw)?,
        &cfg,
    )?;
    io::write_string(&a.out, &model.to_json()?)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(0)
}

fn evaluate(a: EvaluateArgs) -> Result<u8, Error> {
    let model = Mlp::from_json(&io::read_string(&a.model)?)?;
    let test = io::read_labeled_csv(&a.data)?;
    let accuracy = trainer::evaluate_accuracy(&model, &test)?;
    let mut out = serde_json::json!({"n": test.len(), "accuracy": accuracy});
    if let Some(p) = &a.spec {
        let spec = GaussianMixtureSpec::from_json(&io::read_string(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        let xs: Vec<Vec<f64>> = test.into_iter().map(|(x, _)| x).collect();
        out["excess_error"] = spec
            .expected_excess_error(&xs, |x| model.predict(x))?
            .into();
    }
    println!("{out}");
    Ok(0)
}

fn build_config(a: &ExperimentArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_json(&io::read_string(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &a.spec {
        cfg.spec = Some(s.clone());
    }
    if !a.conditioning.is_empty() {
        cfg.conditionings = a
            .conditioning
            .iter()
            .map(|c| {
                experiment::parse_conditioning(c)
                    .map(|set| set.classes().iter().map(|k| k + 1).collect())
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(n) = a.noise {
        cfg.noise = n;
    }
    if !a.estimator.is_empty() {
        cfg.estimators = a.estimator.clone();
    }
    if !a.n.is_empty() {
        cfg.n_ladder = a.n.clone();
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if let Some(v) = a.analytic_ratio {
        cfg.analytic_ratio = v;
    }
    if let Some(v) = a.analytic_confidence {
        cfg.analytic_confidence = v;
    }
    if let Some(v) = a.match_n {
        cfg.match_n = v;
    }
    if let Some(f) = a.floor {
        cfg.train.floor = f;
    }
    cfg.with_overrides(&a.sets)
}

fn run_experiment(a: ExperimentArgs) -> Result<u8, Error> {
    let cfg = build_config(&a)?;
    let outcome = experiment::run_experiment(&cfg)?;
    print!("{}", outcome.table.to_text());
    for t in outcome.trials.iter().filter_map(|t| t.error.as_ref()) {
        eprintln!("warning: {t}");
    }
    Ok(if outcome.all_diverged() {
        EXIT_ALL_DIVERGED
    } else {
        0
    })
}

fn report(a: ReportArgs) -> Result<u8, Error> {
    let run = experiment::load_run(&a.run)?;
    for w in &run.warnings {
        eprintln!("{w}");
    }
    let table = ResultTable::from_trials(&run.trials);
    experiment::write_tables(&a.run, &table, &run.trials)?;
    print!("{}", table.to_text());
    Ok(if run.warnings.is_empty() {
        0
    } else {
        EXIT_PARTIAL
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::FitRatio(a) => fit_ratio(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => run_experiment(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
