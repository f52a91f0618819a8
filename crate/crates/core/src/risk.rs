//! Per-example loss weights for each risk estimator, and the weighted
//! empirical risk they all share.
//!
//! Every estimator reduces to `(1/n) Σ_i Σ_y w_i[y] ℓ(g(x_i), y)`; they differ
//! only in how `w_i` is built from the confidence vector `r_i` (and, for the
//! noise-robust variants, the density ratio `φ(x_i)`):
//!
//! | estimator          | `w_i[y]`                            |
//! |--------------------|-------------------------------------|
//! | SC-Conf            | `r_i[y] / max(r_i[y_s], floor)`     |
//! | Sub-Conf           | `r_i[y] / max(Σ_{s∈S} r_i[s], floor)` |
//! | NoRSC(-Sub)-Conf   | `φ(x_i) · r_i[y]`                   |
//! | weighted baseline  | `r_i[y]`                            |
//! | supervised         | one-hot of the label                |
//!
//! Class-prior factors (`π_{y_s}`, `π_S`) are constants and are left out of
//! the weights; multiply the risk by them when the absolute value matters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, Mlp};

/// Tolerance on `|Σ r - 1|` below which a confidence vector is renormalised.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Default clipping floor for the conditioning-class confidence.
pub const DEFAULT_FLOOR: f64 = 1e-2;

/// A class-posterior vector: entries in `[0, 1]` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector(Vec<f64>);

impl ConfidenceVector {
    /// Validates and renormalises. Sums off by more than [`SUM_TOLERANCE`] are rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Confidence("empty vector".into()));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::Confidence(format!("entry {v} outside [0, 1]")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Confidence(format!("entries sum to {sum}, not 1")));
        }
        // already normalised up to rounding; leave untouched so ingest is idempotent
        if (sum - 1.0).abs() <= 1e-12 {
            return Ok(ConfidenceVector(values));
        }
        Ok(ConfidenceVector(
            values.into_iter().map(|v| v / sum).collect(),
        ))
    }

    pub fn one_hot(class: usize, k: usize) -> Result<Self> {
        if class >= k {
            return Err(Error::ClassIndex {
                index: class,
                classes: k,
            });
        }
        let mut v = vec![0.0; k];
        v[class] = 1.0;
        Ok(ConfidenceVector(v))
    }

    pub fn uniform(k: usize) -> Self {
        ConfidenceVector(vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn argmax(&self) -> usize {
        nn::argmax(&self.0)
    }

    fn get(&self, class: usize) -> Result<f64> {
        self.0.get(class).copied().ok_or(Error::ClassIndex {
            index: class,
            classes: self.0.len(),
        })
    }
}

impl std::ops::Index<usize> for ConfidenceVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Nonnegative per-class loss weights for one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::WeightDomain(format!(
                "weights must be finite and nonnegative, got {v}"
            )));
        }
        Ok(Weights(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Weights::new(self.0.iter().map(|w| w * factor).collect())
    }
}

/// Nonempty, sorted, duplicate-free set of 0-based class indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ClassSet(Vec<usize>);

impl ClassSet {
    pub fn new(mut classes: Vec<usize>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Argument("class subset must be nonempty".into()));
        }
        classes.sort_unstable();
        classes.dedup();
        Ok(ClassSet(classes))
    }

    pub fn singleton(class: usize) -> Self {
        ClassSet(vec![class])
    }

    pub fn all(k: usize) -> Self {
        ClassSet((0..k).collect())
    }

    /// Errors unless every member is below `k`.
    pub fn check(&self, k: usize) -> Result<()> {
        match self.0.iter().find(|&&c| c >= k) {
            Some(&c) => Err(Error::ClassIndex {
                index: c,
                classes: k,
            }),
            None => Ok(()),
        }
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<usize>> for ClassSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        ClassSet::new(v)
    }
}

impl From<ClassSet> for Vec<usize> {
    fn from(s: ClassSet) -> Self {
        s.0
    }
}

/// Which estimator's weights to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    ScConf {
        class: usize,
    },
    SubConf {
        classes: ClassSet,
    },
    /// Needs `φ = p(x) / p(x | y = class)`.
    NoRscConf {
        class: usize,
    },
    /// Needs `φ = p(x) / p(x | y ∈ classes)`.
    NoRscSubConf {
        classes: ClassSet,
    },
    WeightedBaseline,
    Supervised,
}

impl EstimatorKind {
    pub fn needs_ratio(&self) -> bool {
        matches!(
            self,
            EstimatorKind::NoRscConf { .. } | EstimatorKind::NoRscSubConf { .. }
        )
    }

    /// Short label used in tables and file names.
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::ScConf { .. } => "sc_conf",
            EstimatorKind::SubConf { .. } => "sub_conf",
            EstimatorKind::NoRscConf { .. } => "norsc_conf",
            EstimatorKind::NoRscSubConf { .. } => "norsc_sub_conf",
            EstimatorKind::WeightedBaseline => "weighted",
            EstimatorKind::Supervised => "supervised",
        }
    }

    /// The class set the training data are conditioned on, if any.
    pub fn conditioning(&self) -> Option<ClassSet> {
        match self {
            EstimatorKind::ScConf { class } | EstimatorKind::NoRscConf { class } => {
                Some(ClassSet::singleton(*class))
            }
            EstimatorKind::SubConf { classes } | EstimatorKind::NoRscSubConf { classes } => {
                Some(classes.clone())
            }
            _ => None,
        }
    }

    /// Parses `sc_conf`, `sub_conf`, `norsc_conf`, `norsc_sub_conf`,
    /// `weighted`, `supervised`, binding the conditioning classes given.
    pub fn parse(name: &str, conditioning: &ClassSet) -> Result<Self> {
        let single = || -> Result<usize> {
            match conditioning.classes() {
                [c] => Ok(*c),
                _ => Err(Error::Config(format!(
                    "estimator `{name}` needs a single conditioning class"
                ))),
            }
        };
        Ok(
            match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                "sc_conf" | "scconf" => EstimatorKind::ScConf { class: single()? },
                "sub_conf" | "subconf" => EstimatorKind::SubConf {
                    classes: conditioning.clone(),
                },
                "norsc_conf" | "norscconf" => EstimatorKind::NoRscConf { class: single()? },
                "norsc_sub_conf" | "norscsubconf" => EstimatorKind::NoRscSubConf {
                    classes: conditioning.clone(),
                },
                "weighted" | "weighted_baseline" => EstimatorKind::WeightedBaseline,
                "supervised" => EstimatorKind::Supervised,
                other => return Err(Error::Config(format!("unknown estimator `{other}`"))),
            },
        )
    }
}

fn check_floor(floor: f64) -> Result<()> {
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::Argument(format!(
            "floor must lie in [0, 1), got {floor}"
        )));
    }
    Ok(())
}

fn ratio_weights(r: &ConfidenceVector, denom: f64, floor: f64) -> Result<Weights> {
    let d = denom.max(floor);
    if d == 0.0 {
        return Err(Error::DivisionDomain);
    }
    Weights::new(r.as_slice().iter().map(|ry| ry / d).collect())
}

/// SC-Conf: `w[y] = r[y] / max(r[y_s], floor)`.
pub fn sc_conf_weights(r: &ConfidenceVector, y_s: usize, floor: f64) -> Result<Weights> {
    check_floor(floor)?;
    ratio_weights(r, r.get(y_s)?, floor)
}

/// Sub-Conf: `w[y] = r[y] / max(Σ_{s∈S} r[s], floor)`.
pub fn sub_conf_weights(r: &ConfidenceVector, subset: &ClassSet, floor: f64) -> Result<Weights> {
    check_floor(floor)?;
    subset.check(r.len())?;
    let denom = subset
        .classes()
        .iter()
        .fold(0.0, |acc, &c| acc + r.as_slice()[c]);
    ratio_weights(r, denom, floor)
}

/// Noise-robust weights `φ · r̃`, for either the single-class or subset ratio.
pub fn norsc_weights(r: &ConfidenceVector, phi: f64) -> Result<Weights> {
    if !(phi.is_finite() && phi >= 0.0) {
        return Err(Error::WeightDomain(format!(
            "density ratio must be finite and nonnegative, got {phi}"
        )));
    }
    Weights::new(r.as_slice().iter().map(|ry| phi * ry).collect())
}

pub fn weighted_baseline_weights(r: &ConfidenceVector) -> Weights {
    Weights(r.as_slice().to_vec())
}

pub fn one_hot_weights(y: usize, k: usize) -> Result<Weights> {
    Ok(Weights(ConfidenceVector::one_hot(y, k)?.into_inner()))
}

/// Largest minus second-largest entry.
pub fn margin_delta(r: &ConfidenceVector) -> Result<f64> {
    if r.len() < 2 {
        return Err(Error::Argument("margin needs at least two classes".into()));
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in r.as_slice() {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    Ok(first - second)
}

/// Surrogate loss on logits. Classification-calibrated losses only.
pub trait Loss {
    fn loss(&self, logits: &[f64], y: usize) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SoftmaxCrossEntropy;

impl Loss for SoftmaxCrossEntropy {
    fn loss(&self, logits: &[f64], y: usize) -> Result<f64> {
        nn::softmax_ce(logits, y)
    }
}

/// `(1/n) Σ_i Σ_y w_i[y] ℓ(g(x_i), y)` with an arbitrary loss.
pub fn empirical_risk_with<L: Loss>(
    loss: &L,
    model: &Mlp,
    data: &[(&[f64], &[f64])],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("empirical risk over an empty set".into()));
    }
    let k = model.num_classes();
    let mut total = 0.0;
    for (x, w) in data {
        if w.len() != k {
            return Err(Error::Shape {
                expected: k,
                got: w.len(),
            });
        }
        let logits = model.forward(x)?;
        for (y, wy) in w.iter().enumerate() {
            if *wy < 0.0 || !wy.is_finite() {
                return Err(Error::WeightDomain(format!("weight {wy}")));
            }
            if *wy != 0.0 {
                total += wy * loss.loss(&logits, y)?;
            }
        }
    }
    Ok(total / data.len() as f64)
}

/// Weighted empirical risk with softmax cross-entropy.
pub fn empirical_risk(model: &Mlp, data: &[(&[f64], &[f64])]) -> Result<f64> {
    empirical_risk_with(&SoftmaxCrossEntropy, model, data)
}

/// Mean cross-entropy over labelled examples.
pub fn supervised_risk(model: &Mlp, labeled: &[(&[f64], usize)]) -> Result<f64> {
    if labeled.is_empty() {
        return Err(Error::Argument("supervised risk over an empty set".into()));
    }
    let mut total = 0.0;
    for (x, y) in labeled {
        total += nn::softmax_ce(&model.forward(x)?, *y)?;
    }
    Ok(total / labeled.len() as f64)
}
