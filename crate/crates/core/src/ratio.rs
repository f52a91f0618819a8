//! Density-ratio fitting `φ(x) = p(x) / p(x | y ∈ S)` by empirical Bregman
//! divergence minimisation.
//!
//! The ratio model is a nonnegative Gaussian-kernel expansion
//! `φ̂(x) = Σ_b α_b exp(-‖x - c_b‖² / 2σ²)` with centres drawn from the
//! unlabelled sample. With `η(t) = ½(t - 1)²` the empirical divergence is
//! `½ mean_sc φ̂² - mean_u φ̂ + ½`, a quadratic in `α`, so the fit is a ridge
//! solve followed by a nonnegative polish.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    pub centers: Vec<Vec<f64>>,
    pub sigma: f64,
    pub alpha: Vec<f64>,
}

impl RatioModel {
    pub fn new(centers: Vec<Vec<f64>>, sigma: f64, alpha: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != alpha.len() {
            return Err(Error::Argument(
                "need one nonnegative coefficient per centre and at least one centre".into(),
            ));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Argument(format!(
                "bandwidth must be positive, got {sigma}"
            )));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Argument(
                "coefficients must be finite and nonnegative".into(),
            ));
        }
        let d = centers[0].len();
        if centers.iter().any(|c| c.len() != d) {
            return Err(Error::Argument(
                "centres have inconsistent dimension".into(),
            ));
        }
        Ok(RatioModel {
            centers,
            sigma,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    /// Kernel responses `k_b(x)` for every centre.
    pub fn basis(&self, x: &[f64]) -> Vec<f64> {
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        self.centers
            .iter()
            .map(|c| (-sq_dist(c, x) * inv).exp())
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.basis(x)
            .iter()
            .zip(&self.alpha)
            .map(|(k, a)| k * a)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: RatioModel = serde_json::from_str(s)?;
        RatioModel::new(m.centers, m.sigma, m.alpha)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Strictly convex generator of the Bregman divergence.
pub trait Eta {
    fn value(&self, t: f64) -> f64;
    fn grad(&self, t: f64) -> f64;
}

/// `η(t) = ½ (t - 1)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredEta;

impl Eta for SquaredEta {
    fn value(&self, t: f64) -> f64 {
        0.5 * (t - 1.0) * (t - 1.0)
    }
    fn grad(&self, t: f64) -> f64 {
        t - 1.0
    }
}

/// `(1/n) Σ ∇η(φ̂(x_i)) φ̂(x_i) - (1/n) Σ η(φ̂(x_i)) - (1/n_u) Σ ∇η(φ̂(x_j^u))`
/// for any ratio function.
pub fn empirical_bregman_with<E, F>(
    eta: &E,
    ratio: F,
    sc_samples: &[Vec<f64>],
    u_samples: &[Vec<f64>],
) -> Result<f64>
where
    E: Eta,
    F: Fn(&[f64]) -> f64,
{
    if sc_samples.is_empty() || u_samples.is_empty() {
        return Err(Error::Argument("both sample sets must be nonempty".into()));
    }
    let n = sc_samples.len() as f64;
    let nu = u_samples.len() as f64;
    let mut first = 0.0;
    let mut second = 0.0;
    for x in sc_samples {
        let r = ratio(x);
        first += eta.grad(r) * r;
        second += eta.value(r);
    }
    let third: f64 = u_samples.iter().map(|x| eta.grad(ratio(x))).sum();
    Ok(first / n - second / n - third / nu)
}

pub fn empirical_bregman(
    model: &RatioModel,
    sc_samples: &[Vec<f64>],
    u_samples: &[Vec<f64>],
) -> Result<f64> {
    empirical_bregman_with(&SquaredEta, |x| model.eval(x), sc_samples, u_samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum Bandwidth {
    /// Median pairwise distance among the centres.
    MedianHeuristic,
    Fixed(f64),
    /// k-fold cross-validation over multiples of the median heuristic,
    /// using the folds of the ridge rule (5 when the ridge is fixed).
    CrossValidated(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Ridge {
    Fixed {
        lambda: f64,
    },
    /// k-fold cross-validation of the held-out empirical divergence.
    CrossValidated {
        candidates: Vec<f64>,
        folds: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BregmanConfig {
    pub max_centers: usize,
    pub bandwidth: Bandwidth,
    pub ridge: Ridge,
}

impl Default for BregmanConfig {
    fn default() -> Self {
        BregmanConfig {
            max_centers: 100,
            bandwidth: Bandwidth::MedianHeuristic,
            ridge: Ridge::Fixed { lambda: 1e-3 },
        }
    }
}

impl BregmanConfig {
    /// Bandwidth and ridge chosen jointly by 5-fold cross-validation.
    pub fn cross_validated() -> Self {
        BregmanConfig {
            bandwidth: Bandwidth::CrossValidated(vec![0.1, 0.2, 0.4, 0.7, 1.0]),
            ridge: Ridge::CrossValidated {
                candidates: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
                folds: 5,
            },
            ..BregmanConfig::default()
        }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    })
}

fn median_bandwidth(centers: &[Vec<f64>], fallback: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::new();
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            dists.push(sq_dist(&centers[i], &centers[j]).sqrt());
        }
    }
    if dists.is_empty() {
        // a single centre: use its distances to the data instead
        dists = fallback
            .iter()
            .map(|x| sq_dist(&centers[0], x).sqrt())
            .collect();
    }
    match median(dists) {
        Some(m) if m > 0.0 => m,
        _ => 1.0,
    }
}

/// Sufficient statistics `Ĥ = mean_sc k kᵀ`, `ĥ = mean_u k` for fixed centres.
struct Moments {
    h_mat: DMatrix<f64>,
    h_vec: DVector<f64>,
}

fn moments(shape: &RatioModel, sc: &[Vec<f64>], u: &[Vec<f64>]) -> Moments {
    let b = shape.centers.len();
    let design = |xs: &[Vec<f64>]| {
        DMatrix::from_row_iterator(xs.len(), b, xs.iter().flat_map(|x| shape.basis(x)))
    };
    let k_sc = design(sc);
    let h_mat = k_sc.tr_mul(&k_sc) / sc.len() as f64;
    let h_vec = design(u).row_mean().transpose();
    Moments { h_mat, h_vec }
}

/// Minimises `½ αᵀĤα - ĥᵀα + λ αᵀα` over `α ≥ 0`: ridge solve, projection
/// onto the orthant, then coordinate descent on the constrained problem.
fn solve_nonnegative(m: &Moments, lambda: f64) -> Result<Vec<f64>> {
    let b = m.h_vec.len();
    let a = &m.h_mat + DMatrix::<f64>::identity(b, b) * (2.0 * lambda);
    let unconstrained = match a.clone().cholesky() {
        Some(ch) => ch.solve(&m.h_vec),
        None if lambda == 0.0 => {
            return Err(Error::Numeric(
                "kernel moment matrix is singular; use a positive ridge coefficient".into(),
            ))
        }
        None => a
            .clone()
            .lu()
            .solve(&m.h_vec)
            .ok_or_else(|| Error::Numeric("ridge system could not be solved".into()))?,
    };
    let mut alpha: Vec<f64> = unconstrained.iter().map(|v| v.max(0.0)).collect();
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite ratio coefficients".into()));
    }
    if unconstrained.iter().all(|v| *v >= 0.0) {
        return Ok(alpha);
    }
    warm_start_active_set(&a, &m.h_vec, &mut alpha);
    // gradient `Aα - ĥ`, kept current as coordinates move
    let mut grad: Vec<f64> = (&a * DVector::from_column_slice(&alpha) - &m.h_vec)
        .iter()
        .copied()
        .collect();
    for _ in 0..10_000 {
        let mut change = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..b {
            let ajj = a[(j, j)];
            if ajj <= 0.0 {
                continue;
            }
            let next = (alpha[j] - grad[j] / ajj).max(0.0);
            let step = next - alpha[j];
            if step != 0.0 {
                for (i, g) in grad.iter_mut().enumerate() {
                    *g += a[(i, j)] * step;
                }
                alpha[j] = next;
            }
            change = change.max(step.abs());
            scale = scale.max(next);
        }
        if change <= 1e-12 * scale.max(1.0) {
            break;
        }
    }
    Ok(alpha)
}

/// Re-solves the ridge system on the free coordinates, dropping those that
/// go negative and adding those whose gradient still points inward. This
/// usually lands on the constrained optimum; coordinate descent finishes.
fn warm_start_active_set(a: &DMatrix<f64>, h: &DVector<f64>, alpha: &mut [f64]) {
    let b = alpha.len();
    let mut free: Vec<bool> = alpha.iter().map(|v| *v > 0.0).collect();
    for _ in 0..2 * b {
        let idx: Vec<usize> = (0..b).filter(|&j| free[j]).collect();
        if idx.is_empty() {
            break;
        }
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| a[(idx[r], idx[c])]);
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&j| h[j]));
        let Some(ch) = sub.cholesky() else { break };
        let x = ch.solve(&rhs);
        if x.iter().any(|v| !v.is_finite()) {
            break;
        }
        alpha.iter_mut().for_each(|v| *v = 0.0);
        let mut changed = false;
        for (k, &j) in idx.iter().enumerate() {
            if x[k] > 0.0 {
                alpha[j] = x[k];
            } else {
                free[j] = false;
                changed = true;
            }
        }
        if changed {
            continue;
        }
        let grad = a * DVector::from_column_slice(alpha) - h;
        let worst = (0..b)
            .filter(|&j| !free[j])
            .min_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        match worst {
            Some(j) if grad[j] < -1e-12 => free[j] = true,
            _ => break,
        }
    }
}

fn fold_of(i: usize, folds: usize) -> usize {
    i % folds
}

/// Fits `φ̂` from conditional samples (`sc_samples ~ p(x | y ∈ S)`) and
/// unlabelled samples (`u_samples ~ p(x)`). `seed` selects the centres.
pub fn fit_ratio(
    sc_samples: &[Vec<f64>],
    u_samples: &[Vec<f64>],
    config: &BregmanConfig,
    seed: u64,
) -> Result<RatioModel> {
    if sc_samples.is_empty() || u_samples.is_empty() {
        return Err(Error::Argument("both sample sets must be nonempty".into()));
    }
    if config.max_centers == 0 {
        return Err(Error::Argument(
            "at least one basis centre is required".into(),
        ));
    }
    let d = sc_samples[0].len();
    if sc_samples.iter().chain(u_samples).any(|x| x.len() != d) {
        return Err(Error::Argument(
            "samples have inconsistent dimension".into(),
        ));
    }
    let b = config.max_centers.min(u_samples.len());
    let mut rng = rng::seeded(seed);
    let mut picked = index::sample(&mut rng, u_samples.len(), b).into_vec();
    picked.sort_unstable();
    let centers: Vec<Vec<f64>> = picked.iter().map(|&i| u_samples[i].clone()).collect();
    let median = median_bandwidth(&centers, u_samples);
    let sigmas: Vec<f64> = match &config.bandwidth {
        Bandwidth::MedianHeuristic => vec![median],
        Bandwidth::Fixed(s) => vec![*s],
        Bandwidth::CrossValidated(scales) => scales.iter().map(|c| c * median).collect(),
    };
    let (lambdas, folds) = match &config.ridge {
        Ridge::Fixed { lambda } => (vec![*lambda], 5),
        Ridge::CrossValidated { candidates, folds } => (candidates.clone(), *folds),
    };
    if sigmas.is_empty() || lambdas.is_empty() {
        return Err(Error::Argument("no bandwidth or ridge candidates".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Argument(format!(
            "ridge must be nonnegative, got {l}"
        )));
    }
    let shapes = sigmas
        .into_iter()
        .map(|s| RatioModel::new(centers.clone(), s, vec![0.0; b]))
        .collect::<Result<Vec<_>>>()?;

    let (mut model, lambda) = if shapes.len() * lambdas.len() == 1 {
        (shapes[0].clone(), lambdas[0])
    } else {
        select(&shapes, &lambdas, sc_samples, u_samples, folds)?
    };
    model.alpha = solve_nonnegative(&moments(&model, sc_samples, u_samples), lambda)?;
    Ok(model)
}

/// Picks the (shape, ridge) pair with the lowest held-out empirical
/// divergence summed over folds; the first candidate wins ties.
fn select(
    shapes: &[RatioModel],
    lambdas: &[f64],
    sc: &[Vec<f64>],
    u: &[Vec<f64>],
    folds: usize,
) -> Result<(RatioModel, f64)> {
    let folds = folds.max(2);
    if sc.len() < folds || u.len() < folds {
        return Ok((shapes[0].clone(), lambdas[0]));
    }
    let split = |data: &[Vec<f64>], f: usize| {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, x) in data.iter().enumerate() {
            if fold_of(i, folds) == f {
                test.push(x.clone());
            } else {
                train.push(x.clone());
            }
        }
        (train, test)
    };
    let mut scores = vec![0.0; shapes.len() * lambdas.len()];
    for f in 0..folds {
        let (sc_tr, sc_te) = split(sc, f);
        let (u_tr, u_te) = split(u, f);
        for (si, shape) in shapes.iter().enumerate() {
            let m = moments(shape, &sc_tr, &u_tr);
            for (li, &lambda) in lambdas.iter().enumerate() {
                let mut fitted = shape.clone();
                fitted.alpha = match solve_nonnegative(&m, lambda) {
                    Ok(a) => a,
                    // a singular unregularised fold just disqualifies the pair
                    Err(Error::Numeric(_)) => {
                        scores[si * lambdas.len() + li] = f64::INFINITY;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                scores[si * lambdas.len() + li] += empirical_bregman(&fitted, &sc_te, &u_te)?;
            }
        }
    }
    let best = scores
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
        )
        .0;
    Ok((
        shapes[best / lambdas.len()].clone(),
        lambdas[best % lambdas.len()],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng as _;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    fn constant(value: f64) -> impl Fn(&[f64]) -> f64 {
        move |_| value
    }

    #[test]
    fn bregman_of_constant_models() {
        let sc = pts(&[0.1, 0.5, -1.0]);
        let u = pts(&[2.0, 3.0]);
        let zero = empirical_bregman_with(&SquaredEta, constant(0.0), &sc, &u).unwrap();
        assert_relative_eq!(zero, 0.5, epsilon = 1e-15);
        let one = empirical_bregman_with(&SquaredEta, constant(1.0), &sc, &u).unwrap();
        assert_eq!(one, 0.0);
        assert!(empirical_bregman_with(&SquaredEta, constant(1.0), &[], &u).is_err());
    }

    #[test]
    fn bregman_term_by_term() {
        let mut rng = rng::seeded(3);
        let centers: Vec<Vec<f64>> = (0..3)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let model = RatioModel::new(centers, 0.8, vec![0.4, 1.3, 0.2]).unwrap();
        let sc: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let u: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let got = empirical_bregman(&model, &sc, &u).unwrap();
        // ∇η(t) t - η(t) = ½ t² - ½ for the squared generator
        let mut expect = 0.0;
        for x in &sc {
            let mut phi = 0.0;
            for (c, a) in model.centers.iter().zip(&model.alpha) {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                phi += a * (-d2 / (2.0 * 0.64)).exp();
            }
            expect += ((phi - 1.0) * phi - 0.5 * (phi - 1.0).powi(2)) / 5.0;
        }
        for x in &u {
            let mut phi = 0.0;
            for (c, a) in model.centers.iter().zip(&model.alpha) {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                phi += a * (-d2 / (2.0 * 0.64)).exp();
            }
            expect -= (phi - 1.0) / 5.0;
        }
        assert_relative_eq!(got, expect, max_relative = 1e-13);
    }

    #[test]
    fn eval_cases() {
        let m = RatioModel::new(pts(&[0.0, 1.0]), 1.0, vec![0.0, 0.0]).unwrap();
        assert_eq!(m.eval(&[0.3]), 0.0);
        let peak = RatioModel::new(vec![vec![0.5, -0.5]], 0.3, vec![2.0]).unwrap();
        assert_eq!(peak.eval(&[0.5, -0.5]), 2.0);
        let m = RatioModel::new(pts(&[0.0, 1.0, -2.0]), 0.7, vec![0.5, 0.0, 1.5]).unwrap();
        let x = 0.4f64;
        let direct = 0.5 * (-(x * x) / 0.98).exp() + 1.5 * (-((x + 2.0).powi(2)) / 0.98).exp();
        assert_relative_eq!(m.eval(&[x]), direct, max_relative = 1e-14);
        assert!(RatioModel::new(pts(&[0.0]), 1.0, vec![-1.0]).is_err());
    }

    #[test]
    fn single_center_closed_form() {
        let sc = pts(&[0.0, 0.3, -0.2, 1.0]);
        let u = pts(&[0.5, 1.5, -0.4]);
        let lambda = 50.0;
        let cfg = BregmanConfig {
            max_centers: 1,
            bandwidth: Bandwidth::Fixed(1.0),
            ridge: Ridge::Fixed { lambda },
        };
        let m = fit_ratio(&sc, &u, &cfg, 1).unwrap();
        let c = m.centers[0][0];
        let k = |x: f64| (-(x - c) * (x - c) / 2.0).exp();
        let h11 = sc.iter().map(|x| k(x[0]).powi(2)).sum::<f64>() / 4.0;
        let h1 = u.iter().map(|x| k(x[0])).sum::<f64>() / 3.0;
        assert_relative_eq!(m.alpha[0], h1 / (h11 + 2.0 * lambda), max_relative = 1e-12);
    }

    #[test]
    fn singular_without_ridge() {
        // duplicated centres make Ĥ rank one
        let sc = pts(&[0.0, 0.0, 0.0]);
        let u = pts(&[1.0, 1.0, 1.0]);
        let cfg = BregmanConfig {
            max_centers: 3,
            bandwidth: Bandwidth::Fixed(1.0),
            ridge: Ridge::Fixed { lambda: 0.0 },
        };
        assert!(matches!(
            fit_ratio(&sc, &u, &cfg, 0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn fit_beats_reference_models() {
        let mut rng = rng::seeded(5);
        let sc: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let u: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(-1.0..2.0)]).collect();
        for cfg in [BregmanConfig::default(), BregmanConfig::cross_validated()] {
            let m = fit_ratio(&sc, &u, &cfg, 2).unwrap();
            let fitted = empirical_bregman(&m, &sc, &u).unwrap();
            let zero =
                RatioModel::new(m.centers.clone(), m.sigma, vec![0.0; m.alpha.len()]).unwrap();
            let ones =
                RatioModel::new(m.centers.clone(), m.sigma, vec![1.0; m.alpha.len()]).unwrap();
            assert!(fitted <= empirical_bregman(&zero, &sc, &u).unwrap());
            assert!(fitted <= empirical_bregman(&ones, &sc, &u).unwrap());
            assert!(m.alpha.iter().all(|a| *a >= 0.0));
        }
    }

    #[test]
    fn json_round_trip() {
        let m = RatioModel::new(pts(&[0.1, 2.0 / 3.0]), 0.123456789, vec![1e-17, 3.3]).unwrap();
        assert_eq!(RatioModel::from_json(&m.to_json().unwrap()).unwrap(), m);
        assert!(RatioModel::from_json(r#"{"centers":[[0]],"sigma":-1,"alpha":[1]}"#).is_err());
    }

    #[test]
    fn cross_validated_bandwidth_picks_a_candidate() {
        let mut rng = rng::seeded(9);
        let sc: Vec<Vec<f64>> = (0..120).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let u: Vec<Vec<f64>> = (0..120).map(|_| vec![rng.gen_range(-2.0..2.0)]).collect();
        let scales = vec![0.25, 1.0];
        let cfg = BregmanConfig {
            max_centers: 30,
            bandwidth: Bandwidth::CrossValidated(scales.clone()),
            ..BregmanConfig::default()
        };
        let back: BregmanConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);

        let cv = fit_ratio(&sc, &u, &cfg, 4).unwrap();
        let base = fit_ratio(
            &sc,
            &u,
            &BregmanConfig {
                max_centers: 30,
                ..BregmanConfig::default()
            },
            4,
        )
        .unwrap();
        assert!(
            scales
                .iter()
                .any(|s| (s * base.sigma - cv.sigma).abs() < 1e-12 * base.sigma),
            "sigma {} not in candidate set around {}",
            cv.sigma,
            base.sigma
        );
    }
}
