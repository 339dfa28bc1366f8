#ifndef RINGACCEL_H
#define RINGACCEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RaStrategy {
  RA_STRATEGY_OUTPUT_REUSE = 0,
  RA_STRATEGY_INPUT_REUSE = 1,
  RA_STRATEGY_NO_REUSE = 2,
} RaStrategy;

typedef enum RaStatus {
  RA_STATUS_OK = 0,
  RA_STATUS_NULL_ARGUMENT = 1,
  RA_STATUS_INVALID_UTF8 = 2,
  RA_STATUS_UNKNOWN_NETWORK = 3,
  RA_STATUS_IO = 4,
  RA_STATUS_PARSE = 5,
  RA_STATUS_VALIDATION = 6,
  RA_STATUS_TILING = 7,
  RA_STATUS_NO_FEASIBLE_TILING = 8,
  RA_STATUS_HARDWARE = 9,
  RA_STATUS_CAPACITY = 10,
  RA_STATUS_OUT_OF_RANGE = 11,
  RA_STATUS_INVALID_ARGUMENT = 12,
  RA_STATUS_INTERNAL = 13,
} RaStatus;

/**
 * A validated network description.
 */
typedef struct RaNetwork RaNetwork;

/**
 * Tiling choices and costs for one network under one configuration.
 */
typedef struct RaPlan RaPlan;

/**
 * Planning options. Zero `clock_mhz` or `mac_budget` keeps the default
 * hardware value. `tm`/`tn` force a tiling when both are non-zero.
 */
typedef struct RaPlanOptions {
  enum RaStrategy strategy;
  bool ofp;
  bool ppfs;
  bool decompose;
  size_t tm;
  size_t tn;
  double clock_mhz;
  size_t mac_budget;
} RaPlanOptions;

typedef struct RaLayerResult {
  size_t tm;
  size_t tn;
  bool decomposed;
  uint64_t cycles;
  double utilization;
  double gops;
  uint64_t input_bytes;
  uint64_t weight_bytes;
  uint64_t output_bytes;
  uint64_t total_bytes;
} RaLayerResult;

typedef struct RaPlanSummary {
  size_t layers;
  uint64_t total_cycles;
  uint64_t total_bytes;
  double latency_s;
  double utilization;
  double gops;
} RaPlanSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default options: output reuse, searched tiling, default hardware.
 */
struct RaPlanOptions ra_plan_options_default(void);

/**
 * Builds a built-in network (`ecnn`, `vgg16`, `mobilenet_v1`, `ecnn-mini`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum RaStatus ra_network_builtin(const char *name, struct RaNetwork **out);

/**
 * Loads a network from a JSON config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum RaStatus ra_network_load(const char *path, struct RaNetwork **out);

/**
 * # Safety
 * `net` must come from this library and not be used afterwards. Null is ignored.
 */
void ra_network_free(struct RaNetwork *net);

/**
 * # Safety
 * `net` must be a live handle and `out` a writable pointer.
 */
enum RaStatus ra_network_layer_count(const struct RaNetwork *net, size_t *out);

/**
 * Total multiply-accumulates over all layers.
 *
 * # Safety
 * `net` must be a live handle and `out` a writable pointer.
 */
enum RaStatus ra_network_total_macs(const struct RaNetwork *net, uint64_t *out);

/**
 * Runs the tiling search (or applies a forced tiling) and the cost model.
 * A null `opts` means [`ra_plan_options_default`].
 *
 * # Safety
 * `net` must be a live handle, `opts` null or valid, `out` writable.
 */
enum RaStatus ra_plan_network(const struct RaNetwork *net,
                              const struct RaPlanOptions *opts,
                              struct RaPlan **out);

/**
 * # Safety
 * `plan` must come from this library and not be used afterwards. Null is ignored.
 */
void ra_plan_free(struct RaPlan *plan);

/**
 * # Safety
 * `plan` must be a live handle and `out` a writable pointer.
 */
enum RaStatus ra_plan_layer(const struct RaPlan *plan, size_t index, struct RaLayerResult *out);

/**
 * # Safety
 * `plan` must be a live handle and `out` a writable pointer.
 */
enum RaStatus ra_plan_summary(const struct RaPlan *plan, struct RaPlanSummary *out);

/**
 * # Safety
 * `plan` must be a live handle and `out` a writable pointer.
 */
enum RaStatus ra_plan_total_bytes(const struct RaPlan *plan, uint64_t *out);

/**
 * Throughput in Gops for a utilization at the given clock and MAC budget
 * (zero keeps the default).
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum RaStatus ra_performance_gops(double utilization,
                                  double clock_mhz,
                                  size_t mac_budget,
                                  double *out);

/**
 * Tops/W for a throughput in Gops at a power in watts.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum RaStatus ra_energy_efficiency(double gops, double power_w, double *out);

/**
 * Per-layer report as JSON. Release the string with [`ra_string_free`].
 *
 * # Safety
 * `net` must be a live handle, `opts` null or valid, `out` writable.
 */
enum RaStatus ra_report_json(const struct RaNetwork *net,
                             const struct RaPlanOptions *opts,
                             char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void ra_string_free(char *s);

/**
 * Message for the last failed call on this thread, or null after a
 * successful one. Valid until the next call into the library.
 */
const char *ra_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ra_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RINGACCEL_H */
