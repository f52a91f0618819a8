#ifndef SCCONF_H
#define SCCONF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes shared by every function.
typedef enum ScconfStatus {
  SCCONF_STATUS_OK = 0,
  SCCONF_STATUS_NULL_POINTER = 1,
  SCCONF_STATUS_INVALID_ARGUMENT = 2,
  // A buffer length or dimension does not match the object.
  SCCONF_STATUS_SHAPE = 3,
  // A confidence, weight or class index outside its domain.
  SCCONF_STATUS_DOMAIN = 4,
  // Singular system, non-finite value or diverged training.
  SCCONF_STATUS_NUMERIC = 5,
  SCCONF_STATUS_IO = 6,
  SCCONF_STATUS_FORMAT = 7,
  SCCONF_STATUS_PANIC = 8,
} ScconfStatus;

// Opaque multilayer perceptron.
typedef struct ScconfMlp ScconfMlp;

// Opaque fitted density-ratio model.
typedef struct ScconfRatio ScconfRatio;

// Opaque Gaussian-mixture world.
typedef struct ScconfSpec ScconfSpec;

// Training hyper-parameters; start from `scconf_train_config_default`.
typedef struct ScconfTrainConfig {
  size_t epochs;
  size_t batch_size;
  double learning_rate;
  double weight_decay;
  uint64_t seed;
  // Width of each of the `hidden_layers` hidden layers.
  size_t hidden_width;
  size_t hidden_layers;
} ScconfTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *scconf_version(void);

// Message for the last failing call on this thread ("" if none).
const char *scconf_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void scconf_string_free(char *s);

// The built-in three-class benchmark world.
//
// # Safety
// `out` must be a valid pointer.
enum ScconfStatus scconf_spec_default(struct ScconfSpec **out);

// Parses `{"priors": [...], "means": [[...]], "covariances": [[[...]]]}`.
//
// # Safety
// `json` must be NUL-terminated; `out` must be valid.
enum ScconfStatus scconf_spec_from_json(const char *json, struct ScconfSpec **out);

// # Safety
// `spec` must be null or a live handle.
void scconf_spec_free(struct ScconfSpec *spec);

// # Safety
// Pointers must be valid.
enum ScconfStatus scconf_spec_shape(const struct ScconfSpec *spec, size_t *dim, size_t *classes);

// Writes `p(y | x)` for every class into `out[0..k]`.
//
// # Safety
// `x` holds `dim` values and `out` room for `k`.
enum ScconfStatus scconf_spec_posterior(const struct ScconfSpec *spec,
                                        const double *x,
                                        size_t dim,
                                        double *out,
                                        size_t k);

// Writes `p(x) / p(x | y ∈ S)` for the 0-based class set `classes`.
//
// # Safety
// `classes` holds `n_classes` entries and `x` holds `dim` values.
enum ScconfStatus scconf_spec_density_ratio(const struct ScconfSpec *spec,
                                            const size_t *classes,
                                            size_t n_classes,
                                            const double *x,
                                            size_t dim,
                                            double *out);

// Draws `n` instances from `p(x | y ∈ S)` with exact (or one-hot when
// `one_hot` is nonzero) confidences. `xs` receives `n × dim` values and
// `confidences` `n × k`, both row-major.
//
// # Safety
// Buffers must hold the stated number of values.
enum ScconfStatus scconf_spec_sample_confidence(const struct ScconfSpec *spec,
                                                const size_t *classes,
                                                size_t n_classes,
                                                size_t n,
                                                int32_t one_hot,
                                                uint64_t seed,
                                                double *xs,
                                                double *confidences);

// SC-Conf weights `r[y] / max(r[y_s], floor)` into `out[0..k]`.
//
// # Safety
// `confidence` and `out` hold `k` values.
enum ScconfStatus scconf_sc_conf_weights(const double *confidence,
                                         size_t k,
                                         size_t y_s,
                                         double floor,
                                         double *out);

// Sub-Conf weights `r[y] / max(Σ_{s∈S} r[s], floor)` into `out[0..k]`.
//
// # Safety
// `confidence` and `out` hold `k` values, `classes` holds `n_classes`.
enum ScconfStatus scconf_sub_conf_weights(const double *confidence,
                                          size_t k,
                                          const size_t *classes,
                                          size_t n_classes,
                                          double floor,
                                          double *out);

// Glorot-initialised MLP with layer widths `dims[0..n_dims]`
// (input, hidden..., classes).
//
// # Safety
// `dims` holds `n_dims` entries; `out` is valid.
enum ScconfStatus scconf_mlp_new(const size_t *dims,
                                 size_t n_dims,
                                 uint64_t seed,
                                 struct ScconfMlp **out);

// # Safety
// `json` must be NUL-terminated; `out` must be valid.
enum ScconfStatus scconf_mlp_from_json(const char *json, struct ScconfMlp **out);

// Serialises the model; free the string with `scconf_string_free`.
//
// # Safety
// Pointers must be valid.
enum ScconfStatus scconf_mlp_to_json(const struct ScconfMlp *mlp, char **out);

// # Safety
// `mlp` must be null or a live handle.
void scconf_mlp_free(struct ScconfMlp *mlp);

// Input dimension and number of classes.
//
// # Safety
// Pointers must be valid.
enum ScconfStatus scconf_mlp_shape(const struct ScconfMlp *mlp, size_t *dim, size_t *classes);

// Logits for one input into `out[0..k]`.
//
// # Safety
// `x` holds `dim` values, `out` room for `k`.
enum ScconfStatus scconf_mlp_forward(const struct ScconfMlp *mlp,
                                     const double *x,
                                     size_t dim,
                                     double *out,
                                     size_t k);

// Predicted 0-based class for one input (lowest index wins ties).
//
// # Safety
// `x` holds `dim` values; `out` is valid.
enum ScconfStatus scconf_mlp_predict(const struct ScconfMlp *mlp,
                                     const double *x,
                                     size_t dim,
                                     size_t *out);

// Defaults: 100 epochs, batch 100, lr 1e-3, weight decay 1e-4, two hidden
// layers of width 64, seed 0.
struct ScconfTrainConfig scconf_train_config_default(void);

// Trains on `n` rows of weighted data (`xs`: `n × dim`, `weights`:
// `n × k`, row-major, nonnegative), selecting the epoch with the lowest
// risk on the `n_val` validation rows.
//
// # Safety
// Buffers must hold the stated number of values; `out` must be valid.
enum ScconfStatus scconf_train(const struct ScconfTrainConfig *config,
                               const double *xs,
                               const double *weights,
                               size_t n,
                               const double *val_xs,
                               const double *val_weights,
                               size_t n_val,
                               size_t dim,
                               size_t k,
                               struct ScconfMlp **out);

// Fits `φ(x) = p(x) / p(x | y ∈ S)` from conditional rows `sc`
// (`n_sc × dim`) and unlabelled rows `u` (`n_u × dim`). A positive
// `bandwidth` fixes the kernel width, otherwise the median heuristic is
// used; `cross_validate` nonzero selects width and ridge by 5-fold CV and
// ignores both.
//
// # Safety
// Buffers must hold the stated number of values; `out` must be valid.
enum ScconfStatus scconf_ratio_fit(const double *sc,
                                   size_t n_sc,
                                   const double *u,
                                   size_t n_u,
                                   size_t dim,
                                   size_t max_centers,
                                   double bandwidth,
                                   double lambda,
                                   int32_t cross_validate,
                                   uint64_t seed,
                                   struct ScconfRatio **out);

// `φ̂(x)`, always nonnegative.
//
// # Safety
// `x` holds `dim` values; `out` is valid.
enum ScconfStatus scconf_ratio_eval(const struct ScconfRatio *ratio,
                                    const double *x,
                                    size_t dim,
                                    double *out);

// # Safety
// `json` must be NUL-terminated; `out` must be valid.
enum ScconfStatus scconf_ratio_from_json(const char *json, struct ScconfRatio **out);

// Serialises the model; free the string with `scconf_string_free`.
//
// # Safety
// Pointers must be valid.
enum ScconfStatus scconf_ratio_to_json(const struct ScconfRatio *ratio, char **out);

// # Safety
// `ratio` must be null or a live handle.
void scconf_ratio_free(struct ScconfRatio *ratio);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCCONF_H */
