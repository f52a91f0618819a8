//! ERM loop: precomputed per-example weights, mini-batch Adam, and model
//! selection by the estimator's own risk on a held-out confidence split.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Mlp};
use crate::ratio::RatioModel;
use crate::risk::{self, ClassSet, EstimatorKind, Weights};
use crate::rng;
use crate::synthetic::{ConfidenceDataset, GaussianMixtureSpec};

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Clipping floor `C_r` for SC-/Sub-Conf denominators.
    pub floor: f64,
    /// Log a progress line to stderr every this many epochs (0 = silent).
    pub report_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 100,
            lr: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
            hidden: vec![64, 64],
            floor: risk::DEFAULT_FLOOR,
            report_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::Config(format!(
                "batch size {} must lie in 1..={n}",
                self.batch_size
            )));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.lr) || !nonneg(self.weight_decay) {
            return Err(Error::Config(
                "learning rate and weight decay must be nonnegative".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_train_risk: f64,
    /// Full-pass training risk after each epoch.
    pub train_risk: Vec<f64>,
    pub val_risk: Vec<f64>,
    /// 1-based epoch whose parameters were returned.
    pub selected_epoch: usize,
    pub test_accuracy: Option<f64>,
    /// Not serialised, so reruns produce identical files.
    #[serde(skip, default)]
    pub wall_seconds: f64,
}

/// Source of `φ(x)` for the noise-robust estimators.
pub trait DensityRatio {
    fn ratio(&self, x: &[f64]) -> Result<f64>;
}

impl DensityRatio for RatioModel {
    fn ratio(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.eval(x))
    }
}

/// Exact `p(x) / p(x | y ∈ S)` from the generative model.
#[derive(Debug, Clone)]
pub struct AnalyticRatio<'a> {
    pub spec: &'a GaussianMixtureSpec,
    pub subset: ClassSet,
}

impl DensityRatio for AnalyticRatio<'_> {
    fn ratio(&self, x: &[f64]) -> Result<f64> {
        self.spec.true_density_ratio(&self.subset, x)
    }
}

/// Unit ratio; turns the noise-robust weights into the weighted baseline.
#[derive(Debug, Clone, Copy)]
pub struct UnitRatio;

impl DensityRatio for UnitRatio {
    fn ratio(&self, _x: &[f64]) -> Result<f64> {
        Ok(1.0)
    }
}

/// One weight vector per training instance. Weights depend only on the
/// data, so they are built once before training.
pub fn precompute_weights(
    data: &ConfidenceDataset,
    kind: &EstimatorKind,
    ratio: Option<&dyn DensityRatio>,
    floor: f64,
) -> Result<Vec<Weights>> {
    if let Some(cond) = kind.conditioning() {
        if cond != data.conditioning {
            return Err(Error::Config(format!(
                "estimator conditions on {:?} but the data were drawn from {:?}",
                cond.classes(),
                data.conditioning.classes()
            )));
        }
    }
    if kind.needs_ratio() && ratio.is_none() {
        return Err(Error::Config(format!(
            "estimator `{}` needs a density-ratio model",
            kind.name()
        )));
    }
    data.instances
        .iter()
        .zip(&data.confidences)
        .map(|(x, r)| match kind {
            EstimatorKind::ScConf { class } => risk::sc_conf_weights(r, *class, floor),
            EstimatorKind::SubConf { classes } => risk::sub_conf_weights(r, classes, floor),
            EstimatorKind::NoRscConf { .. } | EstimatorKind::NoRscSubConf { .. } => {
                risk::norsc_weights(r, ratio.expect("checked above").ratio(x)?)
            }
            EstimatorKind::WeightedBaseline => Ok(risk::weighted_baseline_weights(r)),
            EstimatorKind::Supervised => Err(Error::Config(
                "supervised training needs labels; use `supervised_weights`".into(),
            )),
        })
        .collect()
}

pub fn supervised_weights(labels: &[usize], k: usize) -> Result<Vec<Weights>> {
    labels
        .iter()
        .map(|&y| risk::one_hot_weights(y, k))
        .collect()
}

/// Instances paired with their precomputed weights.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSet<'a> {
    pub instances: &'a [Vec<f64>],
    pub weights: &'a [Weights],
}

impl<'a> WeightedSet<'a> {
    pub fn new(instances: &'a [Vec<f64>], weights: &'a [Weights]) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Argument("empty training or validation set".into()));
        }
        if instances.len() != weights.len() {
            return Err(Error::Argument(format!(
                "{} instances but {} weight rows",
                instances.len(),
                weights.len()
            )));
        }
        Ok(WeightedSet { instances, weights })
    }

    fn pairs(&self) -> Vec<(&'a [f64], &'a [f64])> {
        self.instances
            .iter()
            .zip(self.weights)
            .map(|(x, w)| (x.as_slice(), w.as_slice()))
            .collect()
    }

    pub fn risk(&self, model: &Mlp) -> Result<f64> {
        risk::empirical_risk(model, &self.pairs())
    }
}

/// Mini-batch Adam over seeded shuffles; returns the snapshot with the
/// lowest validation risk (earliest epoch on ties).
pub fn train(
    train_set: WeightedSet<'_>,
    val_set: WeightedSet<'_>,
    config: &TrainConfig,
) -> Result<(Mlp, TrainReport)> {
    let start = Instant::now();
    let n = train_set.instances.len();
    config.validate(n)?;
    let d = train_set.instances[0].len();
    let k = train_set.weights[0].len();
    if k == 0 {
        return Err(Error::Argument("weight vectors are empty".into()));
    }
    let mut dims = vec![d];
    dims.extend(&config.hidden);
    dims.push(k);
    let mut model = Mlp::new(&dims, rng::derive_seed(config.seed, INIT_STREAM))?;
    let mut adam = AdamState::new(
        &model,
        AdamConfig {
            lr: config.lr,
            weight_decay: config.weight_decay,
            ..AdamConfig::default()
        },
    );
    let mut shuffle_rng = rng::seeded(rng::derive_seed(config.seed, SHUFFLE_STREAM));
    let pairs = train_set.pairs();
    let mut order: Vec<usize> = (0..n).collect();

    let initial_train_risk = risk::empirical_risk(&model, &pairs)?;
    let mut report = TrainReport {
        initial_train_risk,
        train_risk: Vec::with_capacity(config.epochs),
        val_risk: Vec::with_capacity(config.epochs),
        selected_epoch: 0,
        test_accuracy: None,
        wall_seconds: 0.0,
    };
    let mut best = (f64::INFINITY, model.clone());
    let diverged = |epoch: usize, reason: &str| Error::Divergence {
        epoch,
        reason: reason.to_string(),
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], &[f64])> = chunk.iter().map(|&i| pairs[i]).collect();
            let (grad, loss) = model.weighted_batch_grad(&batch)?;
            if !loss.is_finite() {
                return Err(diverged(epoch, "non-finite batch loss"));
            }
            adam.step(&mut model, &grad)
                .map_err(|e| diverged(epoch, &e.to_string()))?;
        }
        let tr = risk::empirical_risk(&model, &pairs)?;
        let va = val_set.risk(&model)?;
        if !tr.is_finite() || !va.is_finite() {
            return Err(diverged(epoch, "non-finite risk"));
        }
        report.train_risk.push(tr);
        report.val_risk.push(va);
        if va < best.0 {
            best = (va, model.clone());
            report.selected_epoch = epoch;
        }
        if config.report_every > 0 && epoch % config.report_every == 0 {
            eprintln!("epoch {epoch:>4}  train {tr:.6}  val {va:.6}");
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((best.1, report))
}

/// Fraction of argmax predictions equal to the labels.
pub fn evaluate_accuracy(model: &Mlp, test: &[(Vec<f64>, usize)]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Argument("empty test set".into()));
    }
    let mut hits = 0usize;
    for (x, y) in test {
        if *y >= model.num_classes() {
            return Err(Error::ClassIndex {
                index: *y,
                classes: model.num_classes(),
            });
        }
        if model.predict(x)? == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::ConfidenceVector;
    use crate::synthetic::Noise;

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 16,
            hidden: vec![8],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn precompute_dispatch() {
        let spec = GaussianMixtureSpec::default_benchmark();
        let set = ClassSet::singleton(2);
        let data = spec
            .build_confidence_dataset(&set, 20, Noise::Clean, 1)
            .unwrap();
        let w = precompute_weights(&data, &EstimatorKind::WeightedBaseline, None, 0.01).unwrap();
        for (w, r) in w.iter().zip(&data.confidences) {
            assert_eq!(w.as_slice(), r.as_slice());
        }
        let analytic = AnalyticRatio {
            spec: &spec,
            subset: set.clone(),
        };
        let w = precompute_weights(
            &data,
            &EstimatorKind::NoRscConf { class: 2 },
            Some(&analytic),
            0.01,
        )
        .unwrap();
        for ((w, r), x) in w.iter().zip(&data.confidences).zip(&data.instances) {
            let phi = spec.true_density_ratio(&set, x).unwrap();
            for (a, b) in w.as_slice().iter().zip(r.as_slice()) {
                assert_eq!(*a, phi * b);
            }
        }
        assert!(matches!(
            precompute_weights(&data, &EstimatorKind::NoRscConf { class: 2 }, None, 0.01),
            Err(Error::Config(_))
        ));
        assert!(
            precompute_weights(&data, &EstimatorKind::ScConf { class: 0 }, None, 0.01).is_err()
        );
    }

    #[test]
    fn sc_conf_on_uniform_rows_is_all_ones() {
        let data = ConfidenceDataset {
            instances: vec![vec![0.0, 1.0]; 4],
            confidences: vec![ConfidenceVector::uniform(3); 4],
            conditioning: ClassSet::singleton(1),
            noise: Noise::Clean,
        };
        let w = precompute_weights(&data, &EstimatorKind::ScConf { class: 1 }, None, 0.01).unwrap();
        assert!(w.iter().all(|w| w.as_slice() == [1.0; 3]));
    }

    #[test]
    fn zero_learning_rate_returns_initial_model() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0, 1.0]).collect();
        let ws = supervised_weights(&(0..20).map(|i| i % 3).collect::<Vec<_>>(), 3).unwrap();
        let set = WeightedSet::new(&xs, &ws).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            lr: 0.0,
            ..small_config()
        };
        let (m, rep) = train(set, set, &cfg).unwrap();
        let init = Mlp::new(&[2, 8, 3], rng::derive_seed(cfg.seed, INIT_STREAM)).unwrap();
        assert_eq!(m, init);
        assert_eq!(rep.selected_epoch, 1);
    }

    #[test]
    fn zero_weights_leave_model_fixed() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ws = vec![Weights::new(vec![0.0, 0.0]).unwrap(); 10];
        let set = WeightedSet::new(&xs, &ws).unwrap();
        let cfg = TrainConfig {
            weight_decay: 0.0,
            batch_size: 5,
            ..small_config()
        };
        let (m, rep) = train(set, set, &cfg).unwrap();
        assert!(rep
            .train_risk
            .iter()
            .chain(&rep.val_risk)
            .all(|r| *r == 0.0));
        assert_eq!(
            m,
            Mlp::new(&[1, 8, 2], rng::derive_seed(cfg.seed, INIT_STREAM)).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        let xs = vec![vec![0.0]; 3];
        let ws = vec![Weights::new(vec![1.0, 0.0]).unwrap(); 3];
        let set = WeightedSet::new(&xs, &ws).unwrap();
        let cfg = TrainConfig {
            batch_size: 4,
            ..small_config()
        };
        assert!(matches!(train(set, set, &cfg), Err(Error::Config(_))));
        assert!(WeightedSet::new(&xs, &ws[..2]).is_err());
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let xs = vec![vec![1e300, -1e300]; 4];
        let ws = vec![Weights::new(vec![1e300, 1e300]).unwrap(); 4];
        let set = WeightedSet::new(&xs, &ws).unwrap();
        let cfg = TrainConfig {
            batch_size: 2,
            ..small_config()
        };
        assert!(matches!(
            train(set, set, &cfg),
            Err(Error::Divergence { epoch: 1, .. })
        ));
    }

    #[test]
    fn accuracy_counts() {
        let constant = Mlp::from_parts(
            vec![vec![vec![0.0], vec![0.0], vec![0.0]]],
            vec![vec![0.0, 1.0, 0.0]],
        )
        .unwrap();
        let all_one: Vec<(Vec<f64>, usize)> = (0..5).map(|i| (vec![i as f64], 1)).collect();
        assert_eq!(evaluate_accuracy(&constant, &all_one).unwrap(), 1.0);
        let none: Vec<(Vec<f64>, usize)> = (0..5).map(|i| (vec![i as f64], 2 * (i % 2))).collect();
        assert_eq!(evaluate_accuracy(&constant, &none).unwrap(), 0.0);
        assert!(evaluate_accuracy(&constant, &[]).is_err());
    }
}
