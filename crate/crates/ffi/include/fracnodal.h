#ifndef FRACNODAL_H
#define FRACNODAL_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FnodStatus {
  FNOD_STATUS_OK = 0,
  FNOD_STATUS_NULL_POINTER = 1,
  FNOD_STATUS_INVALID_ARGUMENT = 2,
  FNOD_STATUS_NUMERICAL = 3,
  FNOD_STATUS_NOT_CONVERGED = 4,
  FNOD_STATUS_DEGENERATE_MASS = 5,
  FNOD_STATUS_NOT_NODAL = 6,
  FNOD_STATUS_OUT_OF_REGIME = 7,
  FNOD_STATUS_BUFFER_TOO_SMALL = 8,
  FNOD_STATUS_PANIC = 9,
} FnodStatus;

typedef enum FnodStratum {
  FNOD_STRATUM_REGULAR = 0,
  FNOD_STRATUM_SINGULAR = 1,
  FNOD_STRATUM_SUBLINEAR = 2,
  FNOD_STRATUM_TIE = 3,
  FNOD_STRATUM_UNCLASSIFIED = 4,
} FnodStratum;

/**
 * Parsed run configuration.
 */
typedef struct FnodConfig FnodConfig;

/**
 * Discrete solution on the half-plane mesh.
 */
typedef struct FnodField FnodField;

/**
 * Problem parameters.
 */
typedef struct FnodParams FnodParams;

/**
 * Angular profile on `[0, pi]`.
 */
typedef struct FnodProfile FnodProfile;

typedef struct FnodExponents {
  double a;
  double k_q;
  uint32_t beta_q;
  double mu;
} FnodExponents;

typedef struct FnodSolveReport {
  size_t iterations;
  double final_update;
  bool converged;
  double interior_residual;
  double boundary_residual;
} FnodSolveReport;

typedef struct FnodNodalPoint {
  double x0;
  double order;
  double uncertainty;
  enum FnodStratum stratum;
  /**
   * `k` for `Singular`, `m` for `Tie`, otherwise 0.
   */
  uint32_t stratum_index;
} FnodNodalPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fnod_version(void);

/**
 * Message of the last failed call on this thread. Writes it into `buf` when
 * `len` is large enough and returns the size needed, including the NUL.
 */
size_t fnod_last_error(char *buf, size_t len);

enum FnodStatus fnod_params_new(double s,
                                double q,
                                double lambda_plus,
                                double lambda_minus,
                                struct FnodParams **out_params);

void fnod_params_free(struct FnodParams *params);

enum FnodStatus fnod_params_exponents(const struct FnodParams *params,
                                      struct FnodExponents *out_exponents);

/**
 * Parses a TOML run configuration held in memory.
 */
enum FnodStatus fnod_config_from_toml(const char *toml, struct FnodConfig **out_config);

enum FnodStatus fnod_config_load(const char *path, struct FnodConfig **out_config);

void fnod_config_free(struct FnodConfig *config);

/**
 * Hex SHA-256 of the canonical config (64 characters plus NUL).
 */
enum FnodStatus fnod_config_hash(const struct FnodConfig *config, char *buf, size_t len);

/**
 * New parameter handle holding the config's parameters.
 */
enum FnodStatus fnod_config_params(const struct FnodConfig *config, struct FnodParams **out_params);

/**
 * Solves the configured problem. `out_report` may be null. A field is
 * returned even when the iteration stops short, with `NotConverged`.
 */
enum FnodStatus fnod_solve(const struct FnodConfig *config,
                           struct FnodField **out_field,
                           struct FnodSolveReport *out_report);

void fnod_field_free(struct FnodField *field);

/**
 * Number of trace nodes, or 0 for a null handle.
 */
size_t fnod_field_trace_len(const struct FnodField *field);

/**
 * Copies trace abscissae (if `xs` is non-null) and values into buffers of `len` entries.
 */
enum FnodStatus fnod_field_trace(const struct FnodField *field,
                                 double *xs,
                                 double *values,
                                 size_t len);

/**
 * Boundary mass `H(x0, r)`.
 */
enum FnodStatus fnod_field_mass(const struct FnodField *field, double x0, double r, double *out_h);

/**
 * Frequency `N_q(x0, r)` with the full trace potential.
 */
enum FnodStatus fnod_field_frequency(const struct FnodField *field,
                                     const struct FnodParams *params,
                                     double x0,
                                     double r,
                                     double *out_n);

/**
 * Vanishing order and stratum at a trace zero `x0`, over the default window.
 */
enum FnodStatus fnod_field_classify(const struct FnodField *field,
                                    const struct FnodParams *params,
                                    double x0,
                                    struct FnodNodalPoint *out_point);

/**
 * Odd-about-`pi/2` profile at critical homogeneity.
 */
enum FnodStatus fnod_profile_antisymmetric(const struct FnodParams *params,
                                           struct FnodProfile **out_profile);

/**
 * Even-about-`pi/2` glued profile; its zero `T*` goes to `out_tstar` if non-null.
 */
enum FnodStatus fnod_profile_symmetric(const struct FnodParams *params,
                                       struct FnodProfile **out_profile,
                                       double *out_tstar);

/**
 * `phi(theta)` and the flux `w(theta)`.
 */
enum FnodStatus fnod_profile_eval(const struct FnodProfile *profile,
                                  double theta,
                                  double *out_phi,
                                  double *out_w);

void fnod_profile_free(struct FnodProfile *profile);

/**
 * Runs one acceptance check with default tolerances. The detail line is
 * left in the last-error slot whatever the outcome.
 */
enum FnodStatus fnod_verify_check(uint8_t id, bool *out_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACNODAL_H */
