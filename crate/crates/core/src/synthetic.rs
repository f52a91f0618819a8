//! Gaussian-mixture ground truth.
//!
//! A [`GaussianMixtureSpec`] gives exact class posteriors (the "clean"
//! confidences), exact density ratios `p(x) / p(x | y ∈ S)`, and the Bayes
//! classifier, so every estimator can be checked against analytic values.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn;
use crate::risk::{ClassSet, ConfidenceVector};
use crate::rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mixture `p(x, y) = π_y N(x; μ_y, Σ_y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecFile", into = "SpecFile")]
pub struct GaussianMixtureSpec {
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
    components: Vec<Component>,
}

/// On-disk form of a spec; mirrors the public fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    /// Lower Cholesky factor of the covariance.
    chol: Vec<Vec<f64>>,
    /// `-½ (d log 2π + log det Σ)`.
    log_norm: f64,
}

impl Component {
    fn new(cov: &[Vec<f64>]) -> Result<Self> {
        let d = cov.len();
        let mut l = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let s: f64 = cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if i == j {
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::Spec("covariance is not positive definite".into()));
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        let log_det = 2.0 * (0..d).map(|i| l[i][i].ln()).sum::<f64>();
        Ok(Component {
            chol: l,
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
        })
    }

    fn log_density(&self, mean: &[f64], x: &[f64]) -> f64 {
        // forward substitution L z = x - μ
        let d = mean.len();
        let mut z = vec![0.0; d];
        let mut quad = 0.0;
        for i in 0..d {
            let s: f64 = (x[i] - mean[i]) - (0..i).map(|k| self.chol[i][k] * z[k]).sum::<f64>();
            z[i] = s / self.chol[i][i];
            quad += z[i] * z[i];
        }
        self.log_norm - 0.5 * quad
    }
}

impl TryFrom<SpecFile> for GaussianMixtureSpec {
    type Error = Error;
    fn try_from(f: SpecFile) -> Result<Self> {
        GaussianMixtureSpec::new(f.priors, f.means, f.covariances)
    }
}

impl From<GaussianMixtureSpec> for SpecFile {
    fn from(s: GaussianMixtureSpec) -> Self {
        SpecFile {
            priors: s.priors,
            means: s.means,
            covariances: s.covariances,
        }
    }
}

/// Clean (exact posterior) or one-hot (argmax only) confidences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Clean,
    #[serde(alias = "one-hot", alias = "one_hot")]
    OneHot,
}

impl std::str::FromStr for Noise {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clean" => Ok(Noise::Clean),
            "onehot" | "one-hot" | "one_hot" => Ok(Noise::OneHot),
            other => Err(Error::Config(format!("unknown noise mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Noise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Noise::Clean => "clean",
            Noise::OneHot => "onehot",
        })
    }
}

/// Conditioning of a confidence dataset: one class or a class subset.
pub type Conditioning = ClassSet;

/// Instances drawn from `p(x | y ∈ conditioning)` with confidence vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceDataset {
    pub instances: Vec<Vec<f64>>,
    pub confidences: Vec<ConfidenceVector>,
    pub conditioning: Conditioning,
    pub noise: Noise,
}

impl ConfidenceDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances.first().map_or(0, Vec::len)
    }

    pub fn num_classes(&self) -> usize {
        self.confidences.first().map_or(0, ConfidenceVector::len)
    }
}

impl GaussianMixtureSpec {
    pub fn new(
        priors: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let k = priors.len();
        if k == 0 {
            return Err(Error::Spec("at least one class is required".into()));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::Spec(format!(
                "{k} priors but {} means and {} covariances",
                means.len(),
                covariances.len()
            )));
        }
        if priors.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Spec("priors must be positive".into()));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Spec(format!("priors sum to {total}, not 1")));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::Spec("dimension must be positive".into()));
        }
        for (m, c) in means.iter().zip(&covariances) {
            if m.len() != d || c.len() != d || c.iter().any(|row| row.len() != d) {
                return Err(Error::Spec(
                    "inconsistent mean/covariance dimensions".into(),
                ));
            }
            if m.iter().chain(c.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::Spec("non-finite mean or covariance entry".into()));
            }
            let asymmetric = (0..d)
                .any(|i| (0..i).any(|j| (c[i][j] - c[j][i]).abs() > 1e-12 * (1.0 + c[i][j].abs())));
            if asymmetric {
                return Err(Error::Spec("covariance is not symmetric".into()));
            }
        }
        let components = covariances
            .iter()
            .map(|c| Component::new(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(GaussianMixtureSpec {
            priors,
            means,
            covariances,
            components,
        })
    }

    /// Isotropic components with the given per-class standard deviations.
    pub fn isotropic(priors: Vec<f64>, means: Vec<Vec<f64>>, stds: &[f64]) -> Result<Self> {
        let d = means.first().map_or(0, Vec::len);
        let covs = stds
            .iter()
            .map(|s| {
                (0..d)
                    .map(|i| (0..d).map(|j| if i == j { s * s } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        GaussianMixtureSpec::new(priors, means, covs)
    }

    /// Benchmark world: d = 2, K = 3, priors (0.3, 0.3, 0.4), unit
    /// covariances, means on an equilateral triangle of side 1.5.
    pub fn default_benchmark() -> Self {
        let side = 1.5;
        let h = side * 3f64.sqrt() / 2.0;
        GaussianMixtureSpec::isotropic(
            vec![0.3, 0.3, 0.4],
            vec![vec![0.0, 0.0], vec![side, 0.0], vec![side / 2.0, h]],
            &[1.0, 1.0, 1.0],
        )
        .expect("default spec is valid")
    }

    /// Designated single class of the benchmark world (the largest prior).
    pub const DEFAULT_CLASS: usize = 2;

    pub fn num_classes(&self) -> usize {
        self.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Vec<Vec<f64>>] {
        &self.covariances
    }

    /// `π_S = Σ_{s∈S} π_s`.
    pub fn prior_mass(&self, subset: &ClassSet) -> Result<f64> {
        subset.check(self.num_classes())?;
        Ok(subset.classes().iter().map(|&c| self.priors[c]).sum())
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `log p(x | y)` for every class.
    pub fn class_log_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        Ok(self
            .components
            .iter()
            .zip(&self.means)
            .map(|(c, m)| c.log_density(m, x))
            .collect())
    }

    /// `log π_y + log p(x | y)`.
    fn log_joint(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .class_log_densities(x)?
            .into_iter()
            .zip(&self.priors)
            .map(|(l, p)| l + p.ln())
            .collect())
    }

    pub fn marginal_density(&self, x: &[f64]) -> Result<f64> {
        Ok(nn::log_sum_exp(&self.log_joint(x)?).exp())
    }

    /// `p(x | y ∈ S)`.
    pub fn conditional_density(&self, subset: &ClassSet, x: &[f64]) -> Result<f64> {
        let pi = self.prior_mass(subset)?;
        let lj = self.log_joint(x)?;
        let sel: Vec<f64> = subset.classes().iter().map(|&c| lj[c]).collect();
        Ok((nn::log_sum_exp(&sel) - pi.ln()).exp())
    }

    /// Bayes posterior `p(y | x)`, evaluated in log space.
    pub fn true_posterior(&self, x: &[f64]) -> Result<ConfidenceVector> {
        let lj = self.log_joint(x)?;
        let mut p = nn::softmax(&lj);
        // exact unit sum so ingest never rescales
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        ConfidenceVector::new(p)
    }

    /// `φ(x) = p(x) / p(x | y ∈ S) = π_S / p(y ∈ S | x)`.
    pub fn true_density_ratio(&self, subset: &ClassSet, x: &[f64]) -> Result<f64> {
        let pi = self.prior_mass(subset)?;
        let lj = self.log_joint(x)?;
        let sel: Vec<f64> = subset.classes().iter().map(|&c| lj[c]).collect();
        Ok((nn::log_sum_exp(&lj) - nn::log_sum_exp(&sel) + pi.ln()).exp())
    }

    fn sample_class(&self, rng: &mut rng::Rng, weights: &[(usize, f64)]) -> usize {
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for &(c, w) in weights {
            acc += w;
            if u < acc {
                return c;
            }
        }
        weights.last().unwrap().0
    }

    fn sample_component(&self, rng: &mut rng::Rng, class: usize) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let l = &self.components[class].chol;
        (0..d)
            .map(|i| self.means[class][i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>())
            .collect()
    }

    /// `n` i.i.d. draws from `p(x, y)`; labels are 0-based.
    pub fn sample_joint(&self, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, usize)>> {
        if n == 0 {
            return Err(Error::Argument("sample size must be at least 1".into()));
        }
        let mut rng = rng::seeded(seed);
        let all: Vec<(usize, f64)> = self.priors.iter().copied().enumerate().collect();
        Ok((0..n)
            .map(|_| {
                let y = self.sample_class(&mut rng, &all);
                (self.sample_component(&mut rng, y), y)
            })
            .collect())
    }

    /// `n` draws from `p(x | y ∈ S)`: the class is drawn proportional to the
    /// priors restricted to `S`, then `x` from that component.
    pub fn sample_class_conditional(
        &self,
        subset: &ClassSet,
        n: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::Argument("sample size must be at least 1".into()));
        }
        subset.check(self.num_classes())?;
        let mut rng = rng::seeded(seed);
        let restricted: Vec<(usize, f64)> = subset
            .classes()
            .iter()
            .map(|&c| (c, self.priors[c]))
            .collect();
        Ok((0..n)
            .map(|_| {
                let y = self.sample_class(&mut rng, &restricted);
                self.sample_component(&mut rng, y)
            })
            .collect())
    }

    /// Monte-Carlo accuracy of the Bayes rule, with its standard error.
    pub fn bayes_accuracy(&self, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
        let samples = self.sample_joint(n_mc, seed)?;
        let mut hits = 0usize;
        for (x, y) in &samples {
            if self.true_posterior(x)?.argmax() == *y {
                hits += 1;
            }
        }
        let acc = hits as f64 / n_mc as f64;
        Ok((acc, (acc * (1.0 - acc) / n_mc as f64).sqrt()))
    }

    /// Expected excess 0-1 error of `predict` over the Bayes rule at `xs`:
    /// mean of `max_y p(y|x) - p(predict(x)|x)`. Conditioning on `x` removes
    /// label noise, so this is far less noisy than differencing accuracies.
    pub fn expected_excess_error<F>(&self, xs: &[Vec<f64>], mut predict: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> Result<usize>,
    {
        if xs.is_empty() {
            return Err(Error::Argument("empty evaluation set".into()));
        }
        let mut total = 0.0;
        for x in xs {
            let post = self.true_posterior(x)?;
            let y = predict(x)?;
            let p = post.as_slice();
            if y >= p.len() {
                return Err(Error::ClassIndex {
                    index: y,
                    classes: p.len(),
                });
            }
            total += p[post.argmax()] - p[y];
        }
        Ok(total / xs.len() as f64)
    }

    /// Samples `p(x | y ∈ S)` and attaches exact posteriors, one-hot
    /// corrupted when `noise` asks for it.
    pub fn build_confidence_dataset(
        &self,
        conditioning: &ClassSet,
        n: usize,
        noise: Noise,
        seed: u64,
    ) -> Result<ConfidenceDataset> {
        let instances = self.sample_class_conditional(conditioning, n, seed)?;
        let confidences = instances
            .iter()
            .map(|x| {
                let r = self.true_posterior(x)?;
                Ok(match noise {
                    Noise::Clean => r,
                    Noise::OneHot => one_hot_corrupt(&r),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConfidenceDataset {
            instances,
            confidences,
            conditioning: conditioning.clone(),
            noise,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Malformed JSON is a format error; a well-formed file that breaks a
    /// spec invariant is a spec error naming it.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: SpecFile = serde_json::from_str(s)?;
        Self::try_from(file)
    }
}

/// Keeps only the argmax (lowest index on ties).
pub fn one_hot_corrupt(r: &ConfidenceVector) -> ConfidenceVector {
    ConfidenceVector::one_hot(r.argmax(), r.len()).expect("argmax is in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::margin_delta;
    use approx::assert_relative_eq;

    fn one_d(mu2: f64) -> GaussianMixtureSpec {
        GaussianMixtureSpec::isotropic(vec![0.5, 0.5], vec![vec![0.0], vec![mu2]], &[1.0, 1.0])
            .unwrap()
    }

    fn normal_pdf(x: f64, mu: f64) -> f64 {
        (-(x - mu) * (x - mu) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn spec_validation() {
        assert!(GaussianMixtureSpec::isotropic(
            vec![0.5, 0.4],
            vec![vec![0.0], vec![1.0]],
            &[1.0, 1.0]
        )
        .is_err());
        assert!(GaussianMixtureSpec::new(
            vec![1.0],
            vec![vec![0.0, 0.0]],
            vec![vec![vec![1.0, 2.0], vec![2.0, 1.0]]]
        )
        .is_err());
        assert!(GaussianMixtureSpec::new(
            vec![1.0],
            vec![vec![0.0, 0.0]],
            vec![vec![vec![1.0, 0.5], vec![0.2, 1.0]]]
        )
        .is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = GaussianMixtureSpec::default_benchmark();
        assert_eq!(
            GaussianMixtureSpec::from_json(&s.to_json().unwrap()).unwrap(),
            s
        );
        assert!(GaussianMixtureSpec::from_json(
            r#"{"priors":[0.2],"means":[[0]],"covariances":[[[1]]]}"#
        )
        .is_err());
    }

    #[test]
    fn sampling_edge_cases() {
        let s = GaussianMixtureSpec::default_benchmark();
        assert!(s.sample_joint(0, 1).is_err());
        let one = s
            .sample_class_conditional(&ClassSet::singleton(1), 1, 3)
            .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 2);
        let k1 = GaussianMixtureSpec::isotropic(vec![1.0], vec![vec![0.0]], &[1.0]).unwrap();
        assert!(k1.sample_joint(50, 2).unwrap().iter().all(|(_, y)| *y == 0));
        assert!(s
            .sample_class_conditional(&ClassSet::singleton(3), 2, 3)
            .is_err());
    }

    #[test]
    fn label_frequencies_follow_priors() {
        let s = GaussianMixtureSpec::isotropic(
            vec![0.2, 0.3, 0.5],
            vec![vec![0.0], vec![1.0], vec![2.0]],
            &[1.0; 3],
        )
        .unwrap();
        let n = 100_000;
        let mut counts = [0usize; 3];
        for (_, y) in s.sample_joint(n, 5).unwrap() {
            counts[y] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn singleton_conditional_mean() {
        let s = GaussianMixtureSpec::default_benchmark();
        let n = 20_000;
        let xs = s
            .sample_class_conditional(&ClassSet::singleton(2), n, 17)
            .unwrap();
        for dim in 0..2 {
            let mean = xs.iter().map(|x| x[dim]).sum::<f64>() / n as f64;
            assert!((mean - s.means()[2][dim]).abs() < 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn posterior_examples() {
        let sym = one_d(2.0);
        let p = sym.true_posterior(&[1.0]).unwrap();
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-15);
        let flat = GaussianMixtureSpec::isotropic(
            vec![0.2, 0.8],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            &[2.0, 2.0],
        )
        .unwrap();
        let p = flat.true_posterior(&[-3.0, 7.0]).unwrap();
        assert_relative_eq!(p[0], 0.2, epsilon = 1e-14);
        // Bayes at x = 1.5 for N(0,1), N(2,1), equal priors
        let (a, b) = (normal_pdf(1.5, 0.0), normal_pdf(1.5, 2.0));
        let p = sym.true_posterior(&[1.5]).unwrap();
        assert_relative_eq!(p[0], a / (a + b), max_relative = 1e-13);
        assert_relative_eq!(p[1], b / (a + b), max_relative = 1e-13);
    }

    #[test]
    fn density_ratio_examples() {
        let k1 = GaussianMixtureSpec::isotropic(vec![1.0], vec![vec![0.0]], &[1.0]).unwrap();
        assert_relative_eq!(
            k1.true_density_ratio(&ClassSet::singleton(0), &[2.5])
                .unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let sym = one_d(2.0);
        assert_relative_eq!(
            sym.true_density_ratio(&ClassSet::singleton(0), &[1.0])
                .unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let direct = 0.5 * (normal_pdf(0.0, 0.0) + normal_pdf(0.0, 2.0)) / normal_pdf(0.0, 0.0);
        assert_relative_eq!(
            sym.true_density_ratio(&ClassSet::singleton(0), &[0.0])
                .unwrap(),
            direct,
            max_relative = 1e-13
        );
    }

    #[test]
    fn ratio_times_posterior_is_prior_mass() {
        let s = GaussianMixtureSpec::default_benchmark();
        let subsets = [ClassSet::singleton(2), ClassSet::new(vec![0, 2]).unwrap()];
        for (x, _) in s.sample_joint(500, 8).unwrap() {
            let r = s.true_posterior(&x).unwrap();
            assert_relative_eq!(r.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(r.as_slice().iter().all(|v| *v > 0.0));
            for sub in &subsets {
                let p_s: f64 = sub.classes().iter().map(|&c| r[c]).sum();
                let phi = s.true_density_ratio(sub, &x).unwrap();
                assert_relative_eq!(phi * p_s, s.prior_mass(sub).unwrap(), epsilon = 1e-10);
                let quotient =
                    s.marginal_density(&x).unwrap() / s.conditional_density(sub, &x).unwrap();
                assert_relative_eq!(phi, quotient, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn one_hot_examples() {
        let r = ConfidenceVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(one_hot_corrupt(&r).as_slice(), &[0.0, 1.0, 0.0]);
        let oh = ConfidenceVector::one_hot(2, 3).unwrap();
        assert_eq!(one_hot_corrupt(&oh), oh);
        assert_eq!(
            one_hot_corrupt(&ConfidenceVector::uniform(3)).as_slice(),
            &[1.0, 0.0, 0.0]
        );
        assert_eq!(margin_delta(&one_hot_corrupt(&r)).unwrap(), 1.0);
    }

    #[test]
    fn bayes_accuracy_cases() {
        let same =
            GaussianMixtureSpec::isotropic(vec![0.25; 4], vec![vec![0.0, 0.0]; 4], &[1.0; 4])
                .unwrap();
        let (acc, se) = same.bayes_accuracy(40_000, 1).unwrap();
        assert!((acc - 0.25).abs() < 3.0 * se, "{acc} ± {se}");

        let far = one_d(10.0);
        assert!(far.bayes_accuracy(20_000, 2).unwrap().0 >= 0.999);
    }

    #[test]
    fn dataset_rows() {
        let s = GaussianMixtureSpec::default_benchmark();
        let set = ClassSet::singleton(2);
        let clean = s
            .build_confidence_dataset(&set, 3, Noise::Clean, 4)
            .unwrap();
        assert_eq!(clean.len(), 3);
        for (x, r) in clean.instances.iter().zip(&clean.confidences) {
            let truth = s.true_posterior(x).unwrap();
            for (a, b) in r.as_slice().iter().zip(truth.as_slice()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        let noisy = s
            .build_confidence_dataset(&set, 50, Noise::OneHot, 4)
            .unwrap();
        for r in &noisy.confidences {
            assert_eq!(r.as_slice().iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(r.as_slice().iter().sum::<f64>(), 1.0);
        }
        // same seed, same instances regardless of noise mode
        assert_eq!(
            noisy.instances[..3],
            s.build_confidence_dataset(&set, 3, Noise::Clean, 4)
                .unwrap()
                .instances[..]
        );
    }
}
