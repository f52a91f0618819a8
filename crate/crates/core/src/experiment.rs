//! Multi-seed experiment grids, per-trial records and result tables.
//!
//! Every trial for a given `(conditioning, n, seed)` sees the same data and
//! the same model initialisation regardless of estimator, so estimators can
//! be compared with a paired t-test over seeds.
//!
//! Class numbers in configs and on the command line are 1-based.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::io;
use crate::nn::Mlp;
use crate::ratio::{self, BregmanConfig};
use crate::risk::{ClassSet, ConfidenceVector, EstimatorKind, Weights};
use crate::rng::derive_seed;
use crate::synthetic::{one_hot_corrupt, ConfidenceDataset, GaussianMixtureSpec, Noise};
use crate::trainer::{self, AnalyticRatio, DensityRatio, TrainConfig, TrainReport, WeightedSet};

/// Seed streams for one trial's data.
mod stream {
    pub const TRAIN: u64 = 10;
    pub const VAL: u64 = 11;
    pub const UNLABELED: u64 = 12;
    pub const TEST: u64 = 13;
    pub const LABELED_TRAIN: u64 = 14;
    pub const LABELED_VAL: u64 = 15;
    pub const RATIO: u64 = 16;
    pub const CONFIDENCE_MODEL: u64 = 17;
    pub const BAYES: u64 = 18;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Mixture spec JSON; the built-in benchmark world when absent.
    pub spec: Option<PathBuf>,
    /// 1-based class sets the confidence data are drawn from.
    pub conditionings: Vec<Vec<usize>>,
    pub noise: Noise,
    pub estimators: Vec<String>,
    pub n_ladder: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub jobs: usize,
    /// Use the exact density ratio instead of fitting one.
    pub analytic_ratio: bool,
    /// Attach exact posteriors as confidences. When false, confidences are
    /// the softmax outputs of an MLP trained on `n` labelled joint samples.
    pub analytic_confidence: bool,
    /// Unlabelled sample size for ratio fitting; defaults to `n`.
    pub n_unlabeled: Option<usize>,
    /// Validation split size as a fraction of `n` (at least one row).
    pub val_fraction: f64,
    pub n_test: usize,
    /// Supervised rows get the same `n` as the weak-data estimators; when
    /// false they get `n / π_S` rows, the joint sample that would contain
    /// `n` instances of the conditioning set in expectation.
    pub match_n: bool,
    pub bayes_mc: usize,
    pub ratio: BregmanConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            spec: None,
            conditionings: vec![vec![GaussianMixtureSpec::DEFAULT_CLASS + 1]],
            noise: Noise::Clean,
            estimators: vec!["sc_conf".into(), "weighted".into()],
            n_ladder: vec![1000],
            seeds: vec![0],
            out: PathBuf::from("run"),
            jobs: 1,
            analytic_ratio: false,
            analytic_confidence: true,
            n_unlabeled: None,
            val_fraction: 0.2,
            n_test: 10_000,
            match_n: true,
            bayes_mc: 200_000,
            ratio: BregmanConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Parses `"3"` or `"1,2"` (1-based) into a 0-based class set.
pub fn parse_conditioning(s: &str) -> Result<ClassSet> {
    let classes = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|c| *c >= 1)
                .map(|c| c - 1)
                .ok_or_else(|| Error::Config(format!("`{t}` is not a 1-based class number")))
        })
        .collect::<Result<Vec<_>>>()?;
    ClassSet::new(classes)
}

pub fn format_conditioning(set: &ClassSet) -> String {
    set.classes()
        .iter()
        .map(|c| (c + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn one_based(v: &[usize]) -> Result<ClassSet> {
    if v.contains(&0) {
        return Err(Error::Config("class numbers are 1-based".into()));
    }
    ClassSet::new(v.iter().map(|c| c - 1).collect())
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies `key=value` overrides; dotted keys reach nested fields and
    /// values are parsed as JSON, falling back to a plain string.
    pub fn with_overrides(&self, sets: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for item in sets {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let parsed = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            let mut slot = &mut value;
            for part in key.split('.') {
                slot = slot
                    .as_object_mut()
                    .ok_or_else(|| Error::Config(format!("`{key}` does not name a field")))?
                    .entry(part.to_string())
                    .or_insert(serde_json::Value::Null);
            }
            *slot = parsed;
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load_spec(&self) -> Result<GaussianMixtureSpec> {
        match &self.spec {
            Some(p) => GaussianMixtureSpec::from_json(&io::read_string(p)?)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
            None => Ok(GaussianMixtureSpec::default_benchmark()),
        }
    }

    /// The trial grid in a fixed order: conditioning, n, estimator, seed.
    pub fn trials(&self, k: usize) -> Result<Vec<TrialSpec>> {
        if self.estimators.is_empty() || self.seeds.is_empty() || self.n_ladder.is_empty() {
            return Err(Error::Config(
                "estimators, seeds and n_ladder must be nonempty".into(),
            ));
        }
        if self.conditionings.is_empty() {
            return Err(Error::Config(
                "at least one conditioning is required".into(),
            ));
        }
        if self.n_ladder.contains(&0) || self.n_test == 0 {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction.is_finite()) {
            return Err(Error::Config("val_fraction must be positive".into()));
        }
        let mut out = Vec::new();
        for cond in &self.conditionings {
            let set = one_based(cond)?;
            set.check(k)?;
            for &n in &self.n_ladder {
                for name in &self.estimators {
                    let estimator = EstimatorKind::parse(name, &set)?;
                    for &seed in &self.seeds {
                        out.push(TrialSpec {
                            estimator: estimator.clone(),
                            conditioning: set.clone(),
                            n,
                            seed,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub estimator: EstimatorKind,
    pub conditioning: ClassSet,
    pub n: usize,
    pub seed: u64,
}

impl TrialSpec {
    pub fn file_name(&self, noise: Noise) -> String {
        format!(
            "{}_c{}_{}_n{}_s{}.json",
            self.estimator.name(),
            format_conditioning(&self.conditioning).replace(',', "-"),
            noise,
            self.n,
            self.seed
        )
    }

    /// Seed shared by every estimator for this data point.
    fn data_seed(&self) -> u64 {
        let mut s = derive_seed(self.seed, self.n as u64);
        for c in self.conditioning.classes() {
            s = derive_seed(s, *c as u64 + 1);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub estimator: String,
    /// 1-based, comma separated.
    pub conditioning: String,
    pub noise: Noise,
    pub n: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub error: Option<String>,
    pub test_accuracy: Option<f64>,
    /// Expected excess error over the Bayes rule on the test inputs.
    pub excess_error: Option<f64>,
    pub bayes_accuracy: f64,
    pub report: Option<TrainReport>,
}

/// Everything a single trial needs that does not depend on the estimator.
pub struct TrialData {
    pub train: ConfidenceDataset,
    pub val: ConfidenceDataset,
    pub unlabeled: Vec<Vec<f64>>,
    pub test: Vec<(Vec<f64>, usize)>,
}

fn confidence_model(
    spec: &GaussianMixtureSpec,
    n: usize,
    seed: u64,
    train_cfg: &TrainConfig,
) -> Result<Mlp> {
    let labeled = spec.sample_joint(n, derive_seed(seed, 1))?;
    let val = spec.sample_joint((n / 5).max(1), derive_seed(seed, 2))?;
    let k = spec.num_classes();
    let split = |d: &[(Vec<f64>, usize)]| -> Result<(Vec<Vec<f64>>, Vec<Weights>)> {
        let xs = d.iter().map(|(x, _)| x.clone()).collect();
        let ys: Vec<usize> = d.iter().map(|(_, y)| *y).collect();
        Ok((xs, trainer::supervised_weights(&ys, k)?))
    };
    let (xs, ws) = split(&labeled)?;
    let (vx, vw) = split(&val)?;
    let cfg = TrainConfig {
        seed,
        batch_size: train_cfg.batch_size.min(n),
        ..train_cfg.clone()
    };
    Ok(trainer::train(
        WeightedSet::new(&xs, &ws)?,
        WeightedSet::new(&vx, &vw)?,
        &cfg,
    )?
    .0)
}

fn model_confidences(model: &Mlp, data: &mut ConfidenceDataset) -> Result<()> {
    for (x, r) in data.instances.iter().zip(data.confidences.iter_mut()) {
        let mut p = crate::nn::softmax(&model.forward(x)?);
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        let cv = ConfidenceVector::new(p)?;
        *r = match data.noise {
            Noise::Clean => cv,
            Noise::OneHot => one_hot_corrupt(&cv),
        };
    }
    Ok(())
}

pub fn generate_trial_data(
    spec: &GaussianMixtureSpec,
    config: &ExperimentConfig,
    trial: &TrialSpec,
) -> Result<TrialData> {
    let seed = trial.data_seed();
    let n_val = ((trial.n as f64 * config.val_fraction).round() as usize).max(1);
    let n_u = config.n_unlabeled.unwrap_or(trial.n).max(1);
    let mut train = spec.build_confidence_dataset(
        &trial.conditioning,
        trial.n,
        config.noise,
        derive_seed(seed, stream::TRAIN),
    )?;
    let mut val = spec.build_confidence_dataset(
        &trial.conditioning,
        n_val,
        config.noise,
        derive_seed(seed, stream::VAL),
    )?;
    if !config.analytic_confidence {
        let model = confidence_model(
            spec,
            trial.n,
            derive_seed(seed, stream::CONFIDENCE_MODEL),
            &config.train,
        )?;
        model_confidences(&model, &mut train)?;
        model_confidences(&model, &mut val)?;
    }
    let unlabeled = spec
        .sample_joint(n_u, derive_seed(seed, stream::UNLABELED))?
        .into_iter()
        .map(|(x, _)| x)
        .collect();
    // shared across the n ladder so rungs are compared on the same points
    let test = spec.sample_joint(config.n_test, derive_seed(trial.seed, stream::TEST))?;
    Ok(TrialData {
        train,
        val,
        unlabeled,
        test,
    })
}

/// Train then validation instances with their one-hot weights.
type LabeledSets = (Vec<Vec<f64>>, Vec<Weights>, Vec<Vec<f64>>, Vec<Weights>);

fn supervised_sets(
    spec: &GaussianMixtureSpec,
    config: &ExperimentConfig,
    trial: &TrialSpec,
) -> Result<LabeledSets> {
    let seed = trial.data_seed();
    let n = if config.match_n {
        trial.n
    } else {
        (trial.n as f64 / spec.prior_mass(&trial.conditioning)?).round() as usize
    };
    let n_val = ((n as f64 * config.val_fraction).round() as usize).max(1);
    let k = spec.num_classes();
    let labeled = spec.sample_joint(n, derive_seed(seed, stream::LABELED_TRAIN))?;
    let val = spec.sample_joint(n_val, derive_seed(seed, stream::LABELED_VAL))?;
    let ys: Vec<usize> = labeled.iter().map(|(_, y)| *y).collect();
    let vys: Vec<usize> = val.iter().map(|(_, y)| *y).collect();
    Ok((
        labeled.into_iter().map(|(x, _)| x).collect(),
        trainer::supervised_weights(&ys, k)?,
        val.into_iter().map(|(x, _)| x).collect(),
        trainer::supervised_weights(&vys, k)?,
    ))
}

/// Runs one grid cell. Divergence is recorded in the returned record;
/// other failures (bad config, IO) are errors.
pub fn run_trial(
    spec: &GaussianMixtureSpec,
    config: &ExperimentConfig,
    trial: &TrialSpec,
    bayes_accuracy: f64,
) -> Result<TrialRecord> {
    let data = generate_trial_data(spec, config, trial)?;
    let train_cfg = TrainConfig {
        seed: trial.seed,
        ..config.train.clone()
    };

    let (xs, ws, vx, vw) = if trial.estimator == EstimatorKind::Supervised {
        supervised_sets(spec, config, trial)?
    } else {
        let fitted;
        let analytic;
        let ratio: Option<&dyn DensityRatio> = if !trial.estimator.needs_ratio() {
            None
        } else if config.analytic_ratio {
            analytic = AnalyticRatio {
                spec,
                subset: trial.conditioning.clone(),
            };
            Some(&analytic)
        } else {
            fitted = ratio::fit_ratio(
                &data.train.instances,
                &data.unlabeled,
                &config.ratio,
                derive_seed(trial.data_seed(), stream::RATIO),
            )?;
            Some(&fitted)
        };
        let floor = train_cfg.floor;
        let ws = trainer::precompute_weights(&data.train, &trial.estimator, ratio, floor)?;
        let vw = trainer::precompute_weights(&data.val, &trial.estimator, ratio, floor)?;
        (data.train.instances, ws, data.val.instances, vw)
    };

    let cfg = TrainConfig {
        batch_size: train_cfg.batch_size.min(xs.len()),
        ..train_cfg
    };
    let mut record = TrialRecord {
        estimator: trial.estimator.name().to_string(),
        conditioning: format_conditioning(&trial.conditioning),
        noise: config.noise,
        n: trial.n,
        seed: trial.seed,
        status: TrialStatus::Ok,
        error: None,
        test_accuracy: None,
        excess_error: None,
        bayes_accuracy,
        report: None,
    };
    match trainer::train(
        WeightedSet::new(&xs, &ws)?,
        WeightedSet::new(&vx, &vw)?,
        &cfg,
    ) {
        Ok((model, mut report)) => {
            let acc = trainer::evaluate_accuracy(&model, &data.test)?;
            report.test_accuracy = Some(acc);
            record.test_accuracy = Some(acc);
            let xs: Vec<Vec<f64>> = data.test.iter().map(|(x, _)| x.clone()).collect();
            record.excess_error = Some(spec.expected_excess_error(&xs, |x| model.predict(x))?);
            record.report = Some(report);
        }
        Err(e @ Error::Divergence { .. }) => {
            record.status = TrialStatus::Diverged;
            record.error = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    /// Highest mean accuracy in its group.
    Best,
    /// Not significantly different from the best (paired t-test, 5%).
    Equivalent,
    Worse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: String,
    pub conditioning: String,
    pub noise: Noise,
    pub n: usize,
    pub seeds: usize,
    pub failures: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub marker: Marker,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Two-sided paired t-test p-value; `None` when it is undefined.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Option<f64> {
    let m = a.len().min(b.len());
    if m < 2 {
        return None;
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / m as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    if var == 0.0 {
        return Some(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / m as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (m - 1) as f64).ok()?;
    Some(2.0 * (1.0 - dist.cdf(t.abs())))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (mean, var.sqrt())
}

type GroupKey = (String, String, usize); // conditioning, noise, n

impl ResultTable {
    /// Aggregates trial records. Row order: conditioning, noise, n, then
    /// estimator in first-seen order.
    pub fn from_trials(trials: &[TrialRecord]) -> Self {
        let mut estimator_order: Vec<String> = Vec::new();
        for t in trials {
            if !estimator_order.contains(&t.estimator) {
                estimator_order.push(t.estimator.clone());
            }
        }
        // group -> estimator -> seed -> accuracy (None when diverged)
        let mut groups: BTreeMap<GroupKey, BTreeMap<usize, BTreeMap<u64, Option<f64>>>> =
            BTreeMap::new();
        let mut noise_of: BTreeMap<String, Noise> = BTreeMap::new();
        for t in trials {
            let est = estimator_order
                .iter()
                .position(|e| *e == t.estimator)
                .unwrap();
            noise_of.insert(t.noise.to_string(), t.noise);
            groups
                .entry((t.conditioning.clone(), t.noise.to_string(), t.n))
                .or_default()
                .entry(est)
                .or_default()
                .insert(t.seed, t.test_accuracy);
        }
        let mut rows = Vec::new();
        for ((cond, noise, n), by_est) in &groups {
            let stats: Vec<_> = by_est
                .iter()
                .map(|(est, seeds)| {
                    let accs: Vec<f64> = seeds.values().flatten().copied().collect();
                    let (m, s) = mean_std(&accs);
                    (*est, seeds, m, s, accs)
                })
                .collect();
            let best = stats
                .iter()
                .filter(|s| !s.2.is_nan())
                .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
                .map(|s| s.0);
            for (est, seeds, mean, std, accs) in &stats {
                let marker = match best {
                    Some(b) if b == *est => Marker::Best,
                    Some(b) => {
                        let best_seeds = by_est[&b].clone();
                        let (mut xa, mut xb) = (Vec::new(), Vec::new());
                        for (seed, acc) in seeds.iter() {
                            if let (Some(a), Some(Some(bb))) = (acc, best_seeds.get(seed)) {
                                xa.push(*a);
                                xb.push(*bb);
                            }
                        }
                        let best_mean = stats.iter().find(|s| s.0 == b).unwrap().2;
                        match paired_t_test(&xa, &xb) {
                            Some(p) if p >= 0.05 => Marker::Equivalent,
                            None if *mean == best_mean => Marker::Equivalent,
                            _ => Marker::Worse,
                        }
                    }
                    None => Marker::Worse,
                };
                rows.push(ResultRow {
                    estimator: estimator_order[*est].clone(),
                    conditioning: cond.clone(),
                    noise: noise_of[noise],
                    n: *n,
                    seeds: accs.len(),
                    failures: seeds.len() - accs.len(),
                    mean_accuracy: *mean,
                    std_accuracy: *std,
                    marker,
                });
            }
        }
        ResultTable { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "estimator,conditioning,noise,n,seeds,failures,mean_accuracy,std_accuracy,marker\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},\"{}\",{},{},{},{},{},{},{}",
                r.estimator,
                r.conditioning,
                r.noise,
                r.n,
                r.seeds,
                r.failures,
                r.mean_accuracy,
                r.std_accuracy,
                marker_name(r.marker)
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<16} {:>6} {:>7} {:>7} {:>6} {:>9} {:>8}  {}\n",
            "estimator", "cond", "noise", "n", "seeds", "mean", "std", "mark"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>7} {:>7} {:>6} {:>9.4} {:>8.4}  {}",
                r.estimator,
                r.conditioning,
                r.noise.to_string(),
                r.n,
                r.seeds,
                r.mean_accuracy,
                r.std_accuracy,
                match r.marker {
                    Marker::Best => "*",
                    Marker::Equivalent => "=",
                    Marker::Worse => "",
                }
            );
        }
        s
    }
}

fn marker_name(m: Marker) -> &'static str {
    match m {
        Marker::Best => "best",
        Marker::Equivalent => "equivalent",
        Marker::Worse => "",
    }
}

/// Long-format rows for plotting: `estimator,n,seed,accuracy,excess_vs_bayes`.
pub fn long_csv(trials: &[TrialRecord]) -> String {
    let mut s = String::from("estimator,n,seed,accuracy,excess_vs_bayes\n");
    for t in trials {
        if let (Some(acc), Some(ex)) = (t.test_accuracy, t.excess_error) {
            let _ = writeln!(s, "{},{},{},{},{}", t.estimator, t.n, t.seed, acc, ex);
        }
    }
    s
}

pub struct ExperimentOutcome {
    pub table: ResultTable,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentOutcome {
    pub fn all_diverged(&self) -> bool {
        self.trials
            .iter()
            .all(|t| t.status == TrialStatus::Diverged)
    }
}

pub fn trials_dir(out: &Path) -> PathBuf {
    out.join("trials")
}

/// Runs the grid, writes one JSON per trial under `out/trials/` plus the
/// aggregate tables, and returns them.
///
/// Trial files are written as trials finish. If `out` already holds a run
/// with the same config (ignoring `jobs`), readable trial files are reused
/// instead of recomputed, so an interrupted run can be restarted.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let spec = config.load_spec()?;
    let grid = config.trials(spec.num_classes())?;
    let (bayes, _) = spec.bayes_accuracy(config.bayes_mc.max(1), derive_seed(0, stream::BAYES))?;

    let dir = trials_dir(&config.out);
    let resume = same_config(&config.out, config);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    io::write_string(
        config.out.join("config.json"),
        &serde_json::to_string_pretty(config)?,
    )?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<TrialRecord>> = pool.install(|| {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|t| {
                let path = dir.join(t.file_name(config.noise));
                if resume {
                    if let Some(rec) = read_trial(&path) {
                        return Ok(rec);
                    }
                }
                let rec = run_trial(&spec, config, t, bayes)?;
                io::write_string(&path, &serde_json::to_string_pretty(&rec)?)?;
                Ok(rec)
            })
            .collect()
    });
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;

    let table = ResultTable::from_trials(&trials);
    write_tables(&config.out, &table, &trials)?;
    Ok(ExperimentOutcome { table, trials })
}

fn same_config(out: &Path, config: &ExperimentConfig) -> bool {
    let Ok(text) = std::fs::read_to_string(out.join("config.json")) else {
        return false;
    };
    match serde_json::from_str::<ExperimentConfig>(&text) {
        Ok(old) => {
            ExperimentConfig {
                jobs: config.jobs,
                ..old
            } == *config
        }
        Err(_) => false,
    }
}

fn read_trial(path: &Path) -> Option<TrialRecord> {
    serde_json::from_str(&std::fs::read_to_string(path).ok()?).ok()
}

pub fn write_tables(out: &Path, table: &ResultTable, trials: &[TrialRecord]) -> Result<()> {
    io::write_string(out.join("results.csv"), &table.to_csv())?;
    io::write_string(out.join("results.txt"), &table.to_text())?;
    io::write_string(out.join("long.csv"), &long_csv(trials))
}

pub struct LoadedRun {
    pub trials: Vec<TrialRecord>,
    /// One line per skipped file.
    pub warnings: Vec<String>,
}

/// Reads every `*.json` under `run_dir/trials`, skipping unreadable ones.
pub fn load_run(run_dir: &Path) -> Result<LoadedRun> {
    let dir = trials_dir(run_dir);
    let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut trials = Vec::new();
    let mut warnings = Vec::new();
    for p in paths {
        match io::read_string(&p).and_then(|s| Ok(serde_json::from_str::<TrialRecord>(&s)?)) {
            Ok(t) => trials.push(t),
            Err(e) => warnings.push(format!("warning: skipping {}: {e}", p.display())),
        }
    }
    if trials.is_empty() {
        return Err(Error::Argument(format!(
            "no readable trial records under {}",
            dir.display()
        )));
    }
    // stable, grid-like order independent of file names
    trials.sort_by(|a, b| {
        (&a.conditioning, a.n, &a.estimator, a.seed).cmp(&(
            &b.conditioning,
            b.n,
            &b.estimator,
            b.seed,
        ))
    });
    Ok(LoadedRun { trials, warnings })
}
