//! C ABI over `scconf`.
//!
//! Conventions:
//! - every fallible function returns an [`ScconfStatus`]; results go through
//!   out-pointers, which are left untouched on failure
//! - objects are opaque handles created by `*_new`/`*_from_json`/`*_fit` and
//!   released with the matching `*_free` (null is accepted and ignored)
//! - class indices are 0-based
//! - after a non-OK status, `scconf_last_error()` describes it; the message
//!   is thread-local and valid until the next failing call on that thread
//! - panics never cross the boundary; they surface as `SCCONF_PANIC`

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use scconf::ratio::{self, Bandwidth, BregmanConfig, RatioModel, Ridge};
use scconf::risk::{self, ClassSet, ConfidenceVector};
use scconf::synthetic::{GaussianMixtureSpec, Noise};
use scconf::trainer::{self, TrainConfig, WeightedSet};
use scconf::{Error, Mlp, Weights};

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScconfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A buffer length or dimension does not match the object.
    Shape = 3,
    /// A confidence, weight or class index outside its domain.
    Domain = 4,
    /// Singular system, non-finite value or diverged training.
    Numeric = 5,
    Io = 6,
    Format = 7,
    Panic = 8,
}

/// Opaque Gaussian-mixture world.
pub struct ScconfSpec(GaussianMixtureSpec);
/// Opaque multilayer perceptron.
pub struct ScconfMlp(Mlp);
/// Opaque fitted density-ratio model.
pub struct ScconfRatio(RatioModel);

/// Training hyper-parameters; start from `scconf_train_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScconfTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Width of each of the `hidden_layers` hidden layers.
    pub hidden_width: usize,
    pub hidden_layers: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ScconfStatus {
    match e {
        Error::Shape { .. } => ScconfStatus::Shape,
        Error::ClassIndex { .. }
        | Error::WeightDomain(_)
        | Error::DivisionDomain
        | Error::Confidence(_) => ScconfStatus::Domain,
        Error::NonFinite(_) | Error::Numeric(_) | Error::Divergence { .. } => ScconfStatus::Numeric,
        Error::Io { .. } => ScconfStatus::Io,
        Error::Format(_) => ScconfStatus::Format,
        _ => ScconfStatus::InvalidArgument,
    }
}

struct Fail(ScconfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ScconfStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(ScconfStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> ScconfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScconfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            ScconfStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not UTF-8")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn rows(flat: &[f64], n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| flat[i * d..(i + 1) * d].to_vec()).collect()
}

fn check_len(got: usize, expected: usize) -> Result<(), Fail> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Shape { expected, got }.into())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scconf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failing call on this thread ("" if none).
#[no_mangle]
pub extern "C" fn scconf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn scconf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------- spec

/// The built-in three-class benchmark world.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scconf_spec_default(out: *mut *mut ScconfSpec) -> ScconfStatus {
    guard(|| {
        let spec = Box::new(ScconfSpec(GaussianMixtureSpec::default_benchmark()));
        put(out, Box::into_raw(spec), "out")
    })
}

/// Parses `{"priors": [...], "means": [[...]], "covariances": [[[...]]]}`.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_spec_from_json(
    json: *const c_char,
    out: *mut *mut ScconfSpec,
) -> ScconfStatus {
    guard(|| {
        let spec = GaussianMixtureSpec::from_json(c_str(json, "json")?)?;
        put(out, Box::into_raw(Box::new(ScconfSpec(spec))), "out")
    })
}

/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scconf_spec_free(spec: *mut ScconfSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_spec_shape(
    spec: *const ScconfSpec,
    dim: *mut usize,
    classes: *mut usize,
) -> ScconfStatus {
    guard(|| {
        let s = &handle(spec, "spec")?.0;
        if dim.is_null() || classes.is_null() {
            return Err(null("dim/classes"));
        }
        put(dim, s.dim(), "dim")?;
        put(classes, s.num_classes(), "classes")
    })
}

/// Writes `p(y | x)` for every class into `out[0..k]`.
///
/// # Safety
/// `x` holds `dim` values and `out` room for `k`.
#[no_mangle]
pub unsafe extern "C" fn scconf_spec_posterior(
    spec: *const ScconfSpec,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    k: usize,
) -> ScconfStatus {
    guard(|| {
        let s = &handle(spec, "spec")?.0;
        check_len(k, s.num_classes())?;
        let post = s.true_posterior(input(x, dim, "x")?)?;
        output(out, k, "out")?.copy_from_slice(post.as_slice());
        Ok(())
    })
}

/// Writes `p(x) / p(x | y ∈ S)` for the 0-based class set `classes`.
///
/// # Safety
/// `classes` holds `n_classes` entries and `x` holds `dim` values.
#[no_mangle]
pub unsafe extern "C" fn scconf_spec_density_ratio(
    spec: *const ScconfSpec,
    classes: *const usize,
    n_classes: usize,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> ScconfStatus {
    guard(|| {
        let s = &handle(spec, "spec")?.0;
        let set = ClassSet::new(input(classes, n_classes, "classes")?.to_vec())?;
        let v = s.true_density_ratio(&set, input(x, dim, "x")?)?;
        put(out, v, "out")
    })
}

/// Draws `n` instances from `p(x | y ∈ S)` with exact (or one-hot when
/// `one_hot` is nonzero) confidences. `xs` receives `n × dim` values and
/// `confidences` `n × k`, both row-major.
///
/// # Safety
/// Buffers must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn scconf_spec_sample_confidence(
    spec: *const ScconfSpec,
    classes: *const usize,
    n_classes: usize,
    n: usize,
    one_hot: i32,
    seed: u64,
    xs: *mut f64,
    confidences: *mut f64,
) -> ScconfStatus {
    guard(|| {
        let s = &handle(spec, "spec")?.0;
        let set = ClassSet::new(input(classes, n_classes, "classes")?.to_vec())?;
        let noise = if one_hot != 0 {
            Noise::OneHot
        } else {
            Noise::Clean
        };
        let data = s.build_confidence_dataset(&set, n, noise, seed)?;
        let (d, k) = (s.dim(), s.num_classes());
        let xs = output(xs, n * d, "xs")?;
        let rs = output(confidences, n * k, "confidences")?;
        for (i, (x, r)) in data.instances.iter().zip(&data.confidences).enumerate() {
            xs[i * d..(i + 1) * d].copy_from_slice(x);
            rs[i * k..(i + 1) * k].copy_from_slice(r.as_slice());
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- weights

/// SC-Conf weights `r[y] / max(r[y_s], floor)` into `out[0..k]`.
///
/// # Safety
/// `confidence` and `out` hold `k` values.
#[no_mangle]
pub unsafe extern "C" fn scconf_sc_conf_weights(
    confidence: *const f64,
    k: usize,
    y_s: usize,
    floor: f64,
    out: *mut f64,
) -> ScconfStatus {
    guard(|| {
        let r = ConfidenceVector::new(input(confidence, k, "confidence")?.to_vec())?;
        let w = risk::sc_conf_weights(&r, y_s, floor)?;
        output(out, k, "out")?.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// Sub-Conf weights `r[y] / max(Σ_{s∈S} r[s], floor)` into `out[0..k]`.
///
/// # Safety
/// `confidence` and `out` hold `k` values, `classes` holds `n_classes`.
#[no_mangle]
pub unsafe extern "C" fn scconf_sub_conf_weights(
    confidence: *const f64,
    k: usize,
    classes: *const usize,
    n_classes: usize,
    floor: f64,
    out: *mut f64,
) -> ScconfStatus {
    guard(|| {
        let r = ConfidenceVector::new(input(confidence, k, "confidence")?.to_vec())?;
        let set = ClassSet::new(input(classes, n_classes, "classes")?.to_vec())?;
        let w = risk::sub_conf_weights(&r, &set, floor)?;
        output(out, k, "out")?.copy_from_slice(w.as_slice());
        Ok(())
    })
}

// ---------------------------------------------------------------- mlp

/// Glorot-initialised MLP with layer widths `dims[0..n_dims]`
/// (input, hidden..., classes).
///
/// # Safety
/// `dims` holds `n_dims` entries; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_mlp_new(
    dims: *const usize,
    n_dims: usize,
    seed: u64,
    out: *mut *mut ScconfMlp,
) -> ScconfStatus {
    guard(|| {
        let m = Mlp::new(input(dims, n_dims, "dims")?, seed)?;
        put(out, Box::into_raw(Box::new(ScconfMlp(m))), "out")
    })
}

/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_mlp_from_json(
    json: *const c_char,
    out: *mut *mut ScconfMlp,
) -> ScconfStatus {
    guard(|| {
        let m = Mlp::from_json(c_str(json, "json")?)?;
        put(out, Box::into_raw(Box::new(ScconfMlp(m))), "out")
    })
}

/// Serialises the model; free the string with `scconf_string_free`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_mlp_to_json(
    mlp: *const ScconfMlp,
    out: *mut *mut c_char,
) -> ScconfStatus {
    guard(|| {
        let s = handle(mlp, "mlp")?.0.to_json()?;
        let c = CString::new(s).map_err(|_| invalid("serialised model contains NUL"))?;
        put(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `mlp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scconf_mlp_free(mlp: *mut ScconfMlp) {
    if !mlp.is_null() {
        drop(Box::from_raw(mlp));
    }
}

/// Input dimension and number of classes.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_mlp_shape(
    mlp: *const ScconfMlp,
    dim: *mut usize,
    classes: *mut usize,
) -> ScconfStatus {
    guard(|| {
        let m = &handle(mlp, "mlp")?.0;
        if dim.is_null() || classes.is_null() {
            return Err(null("dim/classes"));
        }
        put(dim, m.input_dim(), "dim")?;
        put(classes, m.num_classes(), "classes")
    })
}

/// Logits for one input into `out[0..k]`.
///
/// # Safety
/// `x` holds `dim` values, `out` room for `k`.
#[no_mangle]
pub unsafe extern "C" fn scconf_mlp_forward(
    mlp: *const ScconfMlp,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    k: usize,
) -> ScconfStatus {
    guard(|| {
        let m = &handle(mlp, "mlp")?.0;
        check_len(k, m.num_classes())?;
        let logits = m.forward(input(x, dim, "x")?)?;
        output(out, k, "out")?.copy_from_slice(&logits);
        Ok(())
    })
}

/// Predicted 0-based class for one input (lowest index wins ties).
///
/// # Safety
/// `x` holds `dim` values; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_mlp_predict(
    mlp: *const ScconfMlp,
    x: *const f64,
    dim: usize,
    out: *mut usize,
) -> ScconfStatus {
    guard(|| {
        let m = &handle(mlp, "mlp")?.0;
        put(out, m.predict(input(x, dim, "x")?)?, "out")
    })
}

/// Defaults: 100 epochs, batch 100, lr 1e-3, weight decay 1e-4, two hidden
/// layers of width 64, seed 0.
#[no_mangle]
pub extern "C" fn scconf_train_config_default() -> ScconfTrainConfig {
    let d = TrainConfig::default();
    ScconfTrainConfig {
        epochs: d.epochs,
        batch_size: d.batch_size,
        learning_rate: d.lr,
        weight_decay: d.weight_decay,
        seed: d.seed,
        hidden_width: d.hidden.first().copied().unwrap_or(64),
        hidden_layers: d.hidden.len(),
    }
}

/// Trains on `n` rows of weighted data (`xs`: `n × dim`, `weights`:
/// `n × k`, row-major, nonnegative), selecting the epoch with the lowest
/// risk on the `n_val` validation rows.
///
/// # Safety
/// Buffers must hold the stated number of values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_train(
    config: *const ScconfTrainConfig,
    xs: *const f64,
    weights: *const f64,
    n: usize,
    val_xs: *const f64,
    val_weights: *const f64,
    n_val: usize,
    dim: usize,
    k: usize,
    out: *mut *mut ScconfMlp,
) -> ScconfStatus {
    guard(|| {
        let c = *handle(config, "config")?;
        if dim == 0 || k == 0 {
            return Err(invalid("dim and k must be positive"));
        }
        let load = |x: *const f64, w: *const f64, rows_n: usize| -> Result<_, Fail> {
            let xr = rows(input(x, rows_n * dim, "xs")?, rows_n, dim);
            let wr = rows(input(w, rows_n * k, "weights")?, rows_n, k)
                .into_iter()
                .map(Weights::new)
                .collect::<Result<Vec<_>, _>>()?;
            Ok((xr, wr))
        };
        let (tx, tw) = load(xs, weights, n)?;
        let (vx, vw) = load(val_xs, val_weights, n_val)?;
        let cfg = TrainConfig {
            epochs: c.epochs,
            batch_size: c.batch_size,
            lr: c.learning_rate,
            weight_decay: c.weight_decay,
            seed: c.seed,
            hidden: vec![c.hidden_width; c.hidden_layers],
            ..TrainConfig::default()
        };
        let (model, _) = trainer::train(
            WeightedSet::new(&tx, &tw)?,
            WeightedSet::new(&vx, &vw)?,
            &cfg,
        )?;
        put(out, Box::into_raw(Box::new(ScconfMlp(model))), "out")
    })
}

// ---------------------------------------------------------------- ratio

/// Fits `φ(x) = p(x) / p(x | y ∈ S)` from conditional rows `sc`
/// (`n_sc × dim`) and unlabelled rows `u` (`n_u × dim`). A positive
/// `bandwidth` fixes the kernel width, otherwise the median heuristic is
/// used; `cross_validate` nonzero selects width and ridge by 5-fold CV and
/// ignores both.
///
/// # Safety
/// Buffers must hold the stated number of values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_ratio_fit(
    sc: *const f64,
    n_sc: usize,
    u: *const f64,
    n_u: usize,
    dim: usize,
    max_centers: usize,
    bandwidth: f64,
    lambda: f64,
    cross_validate: i32,
    seed: u64,
    out: *mut *mut ScconfRatio,
) -> ScconfStatus {
    guard(|| {
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let sc = rows(input(sc, n_sc * dim, "sc")?, n_sc, dim);
        let u = rows(input(u, n_u * dim, "u")?, n_u, dim);
        let cfg = if cross_validate != 0 {
            BregmanConfig {
                max_centers,
                ..BregmanConfig::cross_validated()
            }
        } else {
            BregmanConfig {
                max_centers,
                bandwidth: if bandwidth > 0.0 {
                    Bandwidth::Fixed(bandwidth)
                } else {
                    Bandwidth::MedianHeuristic
                },
                ridge: Ridge::Fixed { lambda },
            }
        };
        let model = ratio::fit_ratio(&sc, &u, &cfg, seed)?;
        put(out, Box::into_raw(Box::new(ScconfRatio(model))), "out")
    })
}

/// `φ̂(x)`, always nonnegative.
///
/// # Safety
/// `x` holds `dim` values; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_ratio_eval(
    ratio: *const ScconfRatio,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> ScconfStatus {
    guard(|| {
        let r = &handle(ratio, "ratio")?.0;
        check_len(dim, r.dim())?;
        put(out, r.eval(input(x, dim, "x")?), "out")
    })
}

/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_ratio_from_json(
    json: *const c_char,
    out: *mut *mut ScconfRatio,
) -> ScconfStatus {
    guard(|| {
        let r = RatioModel::from_json(c_str(json, "json")?)?;
        put(out, Box::into_raw(Box::new(ScconfRatio(r))), "out")
    })
}

/// Serialises the model; free the string with `scconf_string_free`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn scconf_ratio_to_json(
    ratio: *const ScconfRatio,
    out: *mut *mut c_char,
) -> ScconfStatus {
    guard(|| {
        let s = handle(ratio, "ratio")?.0.to_json()?;
        let c = CString::new(s).map_err(|_| invalid("serialised model contains NUL"))?;
        put(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `ratio` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scconf_ratio_free(ratio: *mut ScconfRatio) {
    if !ratio.is_null() {
        drop(Box::from_raw(ratio));
    }
}
