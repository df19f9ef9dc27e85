#ifndef SPHEROID_H
#define SPHEROID_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SpheroidStatus {
  SPHEROID_STATUS_OK = 0,
  SPHEROID_STATUS_NULL_POINTER = 1,
  SPHEROID_STATUS_INVALID_ARGUMENT = 2,
  SPHEROID_STATUS_OUT_OF_RANGE = 3,
  SPHEROID_STATUS_SOLVER = 4,
  SPHEROID_STATUS_INFERENCE = 5,
  SPHEROID_STATUS_DATA = 6,
  SPHEROID_STATUS_PANIC = 7,
} SpheroidStatus;

// Opaque Markov chain.
typedef struct SpheroidChain SpheroidChain;

// Opaque radius time series.
typedef struct SpheroidDataset SpheroidDataset;

// Opaque non-negative discrete measure.
typedef struct SpheroidMeasure SpheroidMeasure;

// Opaque forward-model trajectory.
typedef struct SpheroidTrajectory SpheroidTrajectory;

typedef struct SpheroidDiscretization {
  size_t n_particles;
  double r_max;
  uint32_t q_exponent;
  double sigma_tilde_ratio;
  double time_step;
} SpheroidDiscretization;

typedef struct SpheroidQuantile {
  double level;
  bool regularize;
  double epsilon;
} SpheroidQuantile;

typedef struct SpheroidSamplerSettings {
  size_t iterations;
  size_t burn_in;
  uint64_t seed;
  double initial_step_size;
  double target_acceptance;
} SpheroidSamplerSettings;

// Log-normal prior: location and scale of each log-parameter, in the order
// alpha, sigma_k, sigma_o, sigma_i.
typedef struct SpheroidPrior {
  double location[4];
  double scale[4];
} SpheroidPrior;

// Model parameters on the natural scale.
typedef struct SpheroidParams {
  double alpha;
  double sigma_k;
  double sigma_o;
  double sigma_i;
} SpheroidParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length, or 0
// when the last call succeeded.
//
// # Safety
// `buf` must be null or valid for `len` writes.
size_t spheroid_last_error_message(char *buf, size_t len);

// # Safety
// `out` must be valid for one write.
enum SpheroidStatus spheroid_discretization_default(struct SpheroidDiscretization *out);

// # Safety
// `out` must be valid for one write.
enum SpheroidStatus spheroid_quantile_default(struct SpheroidQuantile *out);

// # Safety
// `out` must be valid for one write.
enum SpheroidStatus spheroid_sampler_default(struct SpheroidSamplerSettings *out);

// Built-in prior for "L-5178Y", "V-79" or "B-16".
//
// # Safety
// `cell_line` must be a NUL-terminated string, `out` valid for one write.
enum SpheroidStatus spheroid_builtin_prior(const char *cell_line, struct SpheroidPrior *out);

// Radial interaction kernel `L(R, r)`.
//
// # Safety
// `out` must be valid for one write.
enum SpheroidStatus spheroid_kernel_l(double big_r,
                                      double r,
                                      double alpha,
                                      double sigma_k,
                                      double *out);

// Flat norm of the signed measure `sum_i weights[i] * delta(locations[i])`.
//
// # Safety
// `locations` and `weights` must be valid for `len` reads, `out` for one
// write.
enum SpheroidStatus spheroid_flat_norm(const double *locations,
                                       const double *weights,
                                       size_t len,
                                       double *out);

// # Safety
// `locations` and `masses` must be valid for `len` reads, `out` for one
// write.
enum SpheroidStatus spheroid_measure_new(const double *locations,
                                         const double *masses,
                                         size_t len,
                                         struct SpheroidMeasure **out);

// # Safety
// `m` must be null or a handle from this library, not yet freed.
void spheroid_measure_free(struct SpheroidMeasure *m);

// # Safety
// `m` must be a live handle, `out` valid for one write.
enum SpheroidStatus spheroid_measure_len(const struct SpheroidMeasure *m, size_t *out);

// Copies up to `len` masses into `buf`.
//
// # Safety
// `m` must be a live handle, `buf` valid for `len` writes.
enum SpheroidStatus spheroid_measure_masses(const struct SpheroidMeasure *m,
                                            double *buf,
                                            size_t len);

// Flat distance (`exponent` 0) or weighted flat distance (`exponent` 1 or
// 2) between two measures.
//
// # Safety
// `a` and `b` must be live handles, `out` valid for one write.
enum SpheroidStatus spheroid_measure_distance(const struct SpheroidMeasure *a,
                                              const struct SpheroidMeasure *b,
                                              uint32_t exponent,
                                              double *out);

// Forward run from the initial colony, reporting states and radii at
// `times`.
//
// # Safety
// Struct pointers must be valid for reads, `times` for `n_times` reads and
// `out` for one write.
enum SpheroidStatus spheroid_simulate(const struct SpheroidParams *params,
                                      const struct SpheroidDiscretization *disc,
                                      const struct SpheroidQuantile *quantile,
                                      const double *times,
                                      size_t n_times,
                                      struct SpheroidTrajectory **out);

// # Safety
// `t` must be null or a live handle.
void spheroid_trajectory_free(struct SpheroidTrajectory *t);

// Number of reported times.
//
// # Safety
// `t` must be a live handle, `out` valid for one write.
enum SpheroidStatus spheroid_trajectory_len(const struct SpheroidTrajectory *t, size_t *out);

// Copies the radii (mm) into `buf`, which must hold at least the
// trajectory length.
//
// # Safety
// `t` must be a live handle, `buf` valid for `len` writes.
enum SpheroidStatus spheroid_trajectory_radii(const struct SpheroidTrajectory *t,
                                              double *buf,
                                              size_t len);

// New measure handle holding the particle state at `index`.
//
// # Safety
// `t` must be a live handle, `out` valid for one write.
enum SpheroidStatus spheroid_trajectory_state(const struct SpheroidTrajectory *t,
                                              size_t index,
                                              struct SpheroidMeasure **out);

// Dataset from radius observations (times strictly increasing, radii
// positive).
//
// # Safety
// `times` and `radii` must be valid for `len` reads, `out` for one write.
enum SpheroidStatus spheroid_dataset_new(const double *times,
                                         const double *radii,
                                         size_t len,
                                         struct SpheroidDataset **out);

// Loads a `time_day,value_mm` CSV. `diameter` selects halving of the
// values; a window is applied when `window_start <= window_end`.
//
// # Safety
// `path` and `cell_line` must be NUL-terminated strings, `out` valid for
// one write.
enum SpheroidStatus spheroid_dataset_load(const char *path,
                                          const char *cell_line,
                                          bool diameter,
                                          double window_start,
                                          double window_end,
                                          struct SpheroidDataset **out);

// # Safety
// `d` must be null or a live handle.
void spheroid_dataset_free(struct SpheroidDataset *d);

// # Safety
// `d` must be a live handle, `out` valid for one write.
enum SpheroidStatus spheroid_dataset_len(const struct SpheroidDataset *d, size_t *out);

// Log-normal log-likelihood; `-inf` when the forward model fails at
// `params`.
//
// # Safety
// All pointers must be valid; `dataset` a live handle.
enum SpheroidStatus spheroid_log_likelihood(const struct SpheroidParams *params,
                                            const struct SpheroidDataset *dataset,
                                            const struct SpheroidDiscretization *disc,
                                            const struct SpheroidQuantile *quantile,
                                            double *out);

// Runs a Metropolis-Hastings chain. A null `dataset` samples the prior.
//
// # Safety
// All non-dataset pointers must be valid; `dataset` null or a live handle.
enum SpheroidStatus spheroid_run_chain(const struct SpheroidDataset *dataset,
                                       const struct SpheroidPrior *prior,
                                       const struct SpheroidDiscretization *disc,
                                       const struct SpheroidQuantile *quantile,
                                       const struct SpheroidSamplerSettings *settings,
                                       struct SpheroidChain **out);

// # Safety
// `c` must be null or a live handle.
void spheroid_chain_free(struct SpheroidChain *c);

// Number of retained samples.
//
// # Safety
// `c` must be a live handle, `out` valid for one write.
enum SpheroidStatus spheroid_chain_len(const struct SpheroidChain *c, size_t *out);

// Retained sample `index`: log-parameters, log-posterior and acceptance
// flag.
//
// # Safety
// `c` must be a live handle; `log_params` valid for 4 writes; the other out
// pointers for one write each.
enum SpheroidStatus spheroid_chain_sample(const struct SpheroidChain *c,
                                          size_t index,
                                          double *log_params,
                                          double *log_posterior,
                                          bool *accepted);

// # Safety
// `c` must be a live handle, `out` valid for one write.
enum SpheroidStatus spheroid_chain_acceptance_rate(const struct SpheroidChain *c, double *out);

// Highest-posterior retained sample, natural scale.
//
// # Safety
// `c` must be a live handle, `out` valid for one write.
enum SpheroidStatus spheroid_chain_map(const struct SpheroidChain *c, struct SpheroidParams *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPHEROID_H */
