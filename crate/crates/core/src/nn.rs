//! Dense MLP engine: ReLU hidden layers, identity output, softmax
//! cross-entropy, weighted-loss backprop and Adam.
//!
//! Weights of layer `l` are stored row-major with shape `(out, in)`.
//! Class indices are 0-based throughout the library; only the CSV label
//! column is 1-based.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    /// One matrix per layer, each a list of rows (`out` rows of `in` entries).
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped buffer used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &Mlp) -> Self {
        Gradients {
            weights: model
                .weights
                .iter()
                .map(|w| w.iter().map(|row| vec![0.0; row.len()]).collect())
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Iterates all entries, weights layer by layer then biases.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .flat_map(|w| w.iter().flatten())
            .chain(self.biases.iter().flatten())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flat_map(|w| w.iter_mut().flatten())
            .chain(self.biases.iter_mut().flatten())
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::Argument(format!(
                "layer_dims must have at least two positive entries, got {layer_dims:?}"
            )));
        }
        let mut rng = rng::seeded(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.gen_range(-limit..=limit)).collect())
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Builds a model from explicit parameters, checking shapes and finiteness.
    pub fn from_parts(weights: Vec<Vec<Vec<f64>>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Argument(
                "need one bias vector per weight matrix and at least one layer".into(),
            ));
        }
        let input = weights[0].first().map(Vec::len).unwrap_or(0);
        let mut layer_dims = vec![input];
        for (w, b) in weights.iter().zip(&biases) {
            let fan_in = *layer_dims.last().unwrap();
            if w.is_empty() || w.len() != b.len() {
                return Err(Error::Argument("weight rows must match bias length".into()));
            }
            if let Some(row) = w.iter().find(|row| row.len() != fan_in) {
                return Err(Error::Shape {
                    expected: fan_in,
                    got: row.len(),
                });
            }
            layer_dims.push(w.len());
        }
        if layer_dims.contains(&0) {
            return Err(Error::Argument("layer widths must be positive".into()));
        }
        let model = Mlp {
            layer_dims,
            weights,
            biases,
        };
        if !model.params().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(model)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Vec<Vec<f64>>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// All parameters in the same order as [`Gradients::iter`].
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .flat_map(|w| w.iter().flatten())
            .chain(self.biases.iter().flatten())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flat_map(|w| w.iter_mut().flatten())
            .chain(self.biases.iter_mut().flatten())
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients::zeros_like(self)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Logits `g(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut act = x.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = affine(w, b, &act);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            act = next;
        }
        Ok(act)
    }

    /// Activations of every layer, input included; the last entry is the logits.
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.layer_dims.len());
        trace.push(x.to_vec());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = affine(w, b, trace.last().unwrap());
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            trace.push(next);
        }
        trace
    }

    /// Index of the largest logit; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Gradient and value of `(1/B) Σ_i Σ_y w_i[y] · CE(g(x_i), y)` over the batch.
    pub fn weighted_batch_grad(&self, batch: &[(&[f64], &[f64])]) -> Result<(Gradients, f64)> {
        if batch.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        let k = self.num_classes();
        for (x, w) in batch {
            self.check_input(x)?;
            check_weights(w, k)?;
        }
        let mut grad = self.zero_gradients();
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for (x, w) in batch {
            let total: f64 = w.iter().sum();
            if total == 0.0 {
                continue;
            }
            let trace = self.forward_trace(x);
            let logits = trace.last().unwrap();
            let lse = log_sum_exp(logits);
            loss += w
                .iter()
                .zip(logits)
                .map(|(wy, z)| wy * (lse - z))
                .sum::<f64>();
            // d/dz Σ_y w_y CE(z, y) = (Σ_y w_y) softmax(z) - w
            let mut delta: Vec<f64> = logits
                .iter()
                .zip(w.iter())
                .map(|(z, wy)| scale * (total * (z - lse).exp() - wy))
                .collect();
            for l in (0..self.weights.len()).rev() {
                let input = &trace[l];
                let gw = &mut grad.weights[l];
                for (o, d) in delta.iter().enumerate() {
                    grad.biases[l][o] += d;
                    if *d != 0.0 {
                        for (g, a) in gw[o].iter_mut().zip(input) {
                            *g += d * a;
                        }
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let mut prev = vec![0.0; input.len()];
                    for (o, d) in delta.iter().enumerate() {
                        if *d != 0.0 {
                            for (p, wv) in prev.iter_mut().zip(&w[o]) {
                                *p += d * wv;
                            }
                        }
                    }
                    // ReLU mask; `input` holds post-activation values.
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((grad, loss * scale))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            layer_dims: Vec<usize>,
            weights: Vec<Vec<Vec<f64>>>,
            biases: Vec<Vec<f64>>,
        }
        let raw: Raw = serde_json::from_str(s)?;
        let model = Mlp::from_parts(raw.weights, raw.biases)?;
        if model.layer_dims != raw.layer_dims {
            return Err(Error::Format(format!(
                "layer_dims {:?} disagree with parameter shapes {:?}",
                raw.layer_dims, model.layer_dims
            )));
        }
        Ok(model)
    }
}

fn affine(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, bias)| bias + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

fn check_weights(w: &[f64], k: usize) -> Result<()> {
    if w.len() != k {
        return Err(Error::Shape {
            expected: k,
            got: w.len(),
        });
    }
    if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::WeightDomain(format!(
            "loss weights must be finite and nonnegative, got {bad}"
        )));
    }
    Ok(())
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-log softmax(logits)[y]`, clamped at zero against rounding.
pub fn softmax_ce(logits: &[f64], y: usize) -> Result<f64> {
    if y >= logits.len() {
        return Err(Error::ClassIndex {
            index: y,
            classes: logits.len(),
        });
    }
    Ok((log_sum_exp(logits) - logits[y]).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled (AdamW-style) decay coefficient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(model: &Mlp, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: model.zero_gradients(),
            v: model.zero_gradients(),
        }
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.m
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.v
    }

    /// One bias-corrected Adam update of `model` in place.
    pub fn step(&mut self, model: &mut Mlp, grad: &Gradients) -> Result<()> {
        if grad.len() != self.m.len() {
            return Err(Error::Shape {
                expected: self.m.len(),
                got: grad.len(),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in model
            .params_mut()
            .zip(grad.iter())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let update = (*m / c1) / ((*v / c2).sqrt() + eps);
            if weight_decay > 0.0 {
                *p -= lr * weight_decay * *p;
            }
            *p -= lr * update;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn identity_layer() -> Mlp {
        Mlp::from_parts(
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            vec![vec![0.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let mut m = Mlp::new(&[3, 5, 4], 1).unwrap();
        m.params_mut().for_each(|p| *p = 0.0);
        assert_eq!(m.forward(&[0.3, -2.0, 9.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_layer_forward() {
        assert_eq!(
            identity_layer().forward(&[1.0, 2.0]).unwrap(),
            vec![1.0, 2.0]
        );
    }

    #[test]
    fn forward_rejects_wrong_dim() {
        let m = Mlp::new(&[2, 4, 3], 0).unwrap();
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::Shape {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn softmax_ce_cases() {
        assert_relative_eq!(
            softmax_ce(&[0.7; 4], 2).unwrap(),
            4f64.ln(),
            epsilon = 1e-15
        );
        let v = softmax_ce(&[1000.0, 0.0], 0).unwrap();
        assert!(v.is_finite() && v < 1e-300);
        // -log(e^2 / (e + e^2 + e^3)) = log(e^-1 + 1 + e)
        let direct = (1f64.exp().recip() + 1.0 + 1f64.exp()).ln();
        assert_relative_eq!(
            softmax_ce(&[1.0, 2.0, 3.0], 1).unwrap(),
            direct,
            max_relative = 1e-14
        );
        assert!(matches!(
            softmax_ce(&[1.0, 2.0], 2),
            Err(Error::ClassIndex {
                index: 2,
                classes: 2
            })
        ));
    }

    #[test]
    fn zero_weights_give_zero_grad() {
        let m = Mlp::new(&[2, 6, 3], 4).unwrap();
        let x = [0.3, 0.1];
        let w = [0.0; 3];
        let (g, loss) = m.weighted_batch_grad(&[(&x, &w)]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn negative_weight_rejected() {
        let m = Mlp::new(&[2, 3], 4).unwrap();
        let x = [0.3, 0.1];
        let w = [0.5, -0.1, 0.0];
        assert!(matches!(
            m.weighted_batch_grad(&[(&x, &w)]),
            Err(Error::WeightDomain(_))
        ));
    }

    #[test]
    fn one_hot_weight_is_plain_ce() {
        let m = Mlp::new(&[2, 5, 3], 8).unwrap();
        let x = [0.4, -1.2];
        let (_, loss) = m.weighted_batch_grad(&[(&x, &[0.0, 1.0, 0.0])]).unwrap();
        let ce = softmax_ce(&m.forward(&x).unwrap(), 1).unwrap();
        assert_relative_eq!(loss, ce, max_relative = 1e-14);
    }

    #[test]
    fn adam_zero_grad_is_identity() {
        let mut m = Mlp::new(&[2, 4, 3], 3).unwrap();
        let before = m.clone();
        let mut st = AdamState::new(&m, AdamConfig::default());
        let g = m.zero_gradients();
        for _ in 0..5 {
            st.step(&mut m, &g).unwrap();
        }
        assert_eq!(m, before);
        assert_eq!(st.step, 5);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut m = Mlp::new(&[2, 2], 3).unwrap();
        let before = m.clone();
        let cfg = AdamConfig {
            lr: 0.01,
            eps: 0.0,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(&m, cfg);
        let mut g = m.zero_gradients();
        for (i, v) in g.iter_mut().enumerate() {
            *v = if i % 2 == 0 {
                0.37 * (i + 1) as f64
            } else {
                -2.5
            };
        }
        st.step(&mut m, &g).unwrap();
        for ((a, b), gv) in m.params().zip(before.params()).zip(g.iter()) {
            assert_relative_eq!(a - b, -0.01 * gv.signum(), max_relative = 1e-12);
        }
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut m = Mlp::new(&[2, 2], 3).unwrap();
        let mut st = AdamState::new(&m, AdamConfig::default());
        let mut g = m.zero_gradients();
        *g.iter_mut().next().unwrap() = f64::NAN;
        assert!(matches!(st.step(&mut m, &g), Err(Error::NonFinite(_))));
    }

    #[test]
    fn predict_ties_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        let m = Mlp::from_parts(vec![vec![vec![0.0], vec![0.0]]], vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(m.predict(&[3.0]).unwrap(), 0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = Mlp::new(&[2, 7, 3], 11).unwrap();
        let back = Mlp::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn json_rejects_inconsistent_dims() {
        let m = Mlp::new(&[2, 3], 11).unwrap();
        let s = m.to_json().unwrap().replacen(
            "\"layer_dims\": [\n    2,",
            "\"layer_dims\": [\n    5,",
            1,
        );
        assert!(Mlp::from_json(&s).is_err());
    }
}
