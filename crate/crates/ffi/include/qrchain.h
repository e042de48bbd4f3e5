#ifndef QRCHAIN_H
#define QRCHAIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QrcProtocol {
  QRC_PROTOCOL_TWO_STEP = 0,
  QRC_PROTOCOL_HOP_BY_HOP = 1,
} QrcProtocol;

typedef enum QrcStatus {
  QRC_STATUS_OK = 0,
  QRC_STATUS_NULL_POINTER = 1,
  QRC_STATUS_INVALID_UTF8 = 2,
  QRC_STATUS_CONFIG = 3,
  QRC_STATUS_INVALID_ARGUMENT = 4,
  QRC_STATUS_DOMAIN = 5,
  QRC_STATUS_SIMULATION = 6,
  QRC_STATUS_PANIC = 7,
} QrcStatus;

/**
 * Opaque configuration handle.
 */
typedef struct QrcConfig QrcConfig;

typedef struct QrcIonTheory {
  double mu;
  double p_bsm;
  double t_attempt_s;
  double p_suc;
  double t_exp_s;
  double egr_hz;
  /**
   * NaN for hop-by-hop.
   */
  double fidelity;
} QrcIonTheory;

typedef struct QrcApeTheory {
  double mu;
  double p_rgs;
  double t_rgs_s;
  uint64_t mq_e;
  uint64_t photons;
  double egr_hz;
  double fidelity;
  double fidelity_with_memory;
} QrcApeTheory;

typedef struct QrcSimResult {
  double egr_hz;
  double egr_sem;
  /**
   * NaN when there were no successes.
   */
  double fidelity;
  double fidelity_sem;
  double success_prob;
  double success_prob_sem;
  uint64_t iterations;
  uint64_t successes;
  /**
   * APE only: the success target was not reached.
   */
  bool censored;
} QrcSimResult;

typedef struct QrcRgs {
  uint32_t m;
  uint32_t b0;
  uint32_t b1;
  uint64_t photons;
  double egr_hz;
} QrcRgs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qrc_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next `qrc_*` call on the same thread.
 */
const char *qrc_last_error_message(void);

/**
 * Built-in defaults.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QrcStatus qrc_config_default(struct QrcConfig **out);

/**
 * Parses a JSON configuration; missing keys take their defaults.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum QrcStatus qrc_config_from_json(const char *json, struct QrcConfig **out);

/**
 * Applies one `dotted.key=value` override in place.
 *
 * # Safety
 * `config` must come from `qrc_config_*`; `spec` must be NUL-terminated.
 */
enum QrcStatus qrc_config_set(struct QrcConfig *config, const char *spec);

/**
 * Serialises the configuration. Free the string with `qrc_string_free`.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum QrcStatus qrc_config_to_json(const struct QrcConfig *config, char **out);

/**
 * # Safety
 * `config` must be NULL or a handle not yet freed.
 */
void qrc_config_free(struct QrcConfig *config);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void qrc_string_free(char *s);

/**
 * Closed-form rate and fidelity of a trapped-ion chain.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum QrcStatus qrc_theory_1g(const struct QrcConfig *config,
                             double distance_km,
                             uint32_t n_repeaters,
                             enum QrcProtocol protocol,
                             struct QrcIonTheory *out);

/**
 * Closed-form rate and fidelity of an all-photonic chain.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum QrcStatus qrc_theory_ape(const struct QrcConfig *config,
                              double distance_km,
                              uint32_t n_repeaters,
                              uint32_t m,
                              uint32_t b0,
                              uint32_t b1,
                              struct QrcApeTheory *out);

/**
 * Event-driven simulation of a trapped-ion chain for `iterations` cycles.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum QrcStatus qrc_simulate_1g(const struct QrcConfig *config,
                               double distance_km,
                               uint32_t n_repeaters,
                               enum QrcProtocol protocol,
                               uint64_t iterations,
                               uint64_t seed,
                               struct QrcSimResult *out);

/**
 * Simulates an all-photonic chain until `target_successes` or
 * `max_iterations`; a censored run still returns `QRC_STATUS_OK`.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum QrcStatus qrc_simulate_ape(const struct QrcConfig *config,
                                double distance_km,
                                uint32_t n_repeaters,
                                uint32_t m,
                                uint32_t b0,
                                uint32_t b1,
                                uint64_t target_successes,
                                uint64_t max_iterations,
                                uint64_t seed,
                                struct QrcSimResult *out);

/**
 * Best RGS shape within `photon_budget` for an `n`-repeater chain.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum QrcStatus qrc_optimize_rgs(const struct QrcConfig *config,
                                double distance_km,
                                uint32_t n_repeaters,
                                uint64_t photon_budget,
                                struct QrcRgs *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QRCHAIN_H */
