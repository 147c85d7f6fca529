#ifndef UAV_HEIGHT_H
#define UAV_HEIGHT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UhStatus {
  UH_STATUS_OK = 0,
  UH_STATUS_NULL_POINTER = 1,
  UH_STATUS_INVALID_ARGUMENT = 2,
  UH_STATUS_NO_BASE_STATIONS = 3,
  UH_STATUS_OUT_OF_RANGE = 4,
  UH_STATUS_BUFFER_TOO_SMALL = 5,
  UH_STATUS_RUNTIME = 6,
  UH_STATUS_PANIC = 7,
} UhStatus;

// A generated city.
typedef struct UhTopology UhTopology;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *uh_last_error(void);

// Library version as a static string.
const char *uh_version(void);

// Generate a city with default area and building shape.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum UhStatus uh_topology_generate(double bs_density_km2,
                                   double build_density_km2,
                                   uint64_t seed,
                                   struct UhTopology **out);

// Release a topology. Null is ignored.
//
// # Safety
// `t` must come from [`uh_topology_generate`] and not be freed twice.
void uh_topology_free(struct UhTopology *t);

// # Safety
// `t` must be a live handle and `out` writable.
enum UhStatus uh_topology_bs_count(const struct UhTopology *t, size_t *out);

// Building count of the city.
//
// # Safety
// `t` must be a live handle and `out` writable.
enum UhStatus uh_topology_building_count(const struct UhTopology *t, size_t *out);

// Serialize the city to JSON. Free the result with [`uh_string_free`].
//
// # Safety
// `t` must be a live handle and `out` writable.
enum UhStatus uh_topology_to_json(const struct UhTopology *t, char **out);

// # Safety
// `s` must come from this library, or be null.
void uh_string_free(char *s);

// Whether buildings block the link from `(x, y, z)` to base station `bs`.
//
// # Safety
// `t` must be a live handle and `out` writable.
enum UhStatus uh_is_blocked(const struct UhTopology *t,
                            double x,
                            double y,
                            double z,
                            size_t bs,
                            bool *out);

// Linear SINR at `(x, y, z)` served by base station `serving`, with the
// default radio parameters.
//
// # Safety
// `t` must be a live handle and `out` writable.
enum UhStatus uh_sinr(const struct UhTopology *t,
                      double x,
                      double y,
                      double z,
                      size_t serving,
                      double *out);

// Index of the base station nearest to `(x, y)` in the horizontal plane.
//
// # Safety
// `t` must be a live handle and `out` writable.
enum UhStatus uh_nearest_bs(const struct UhTopology *t, double x, double y, size_t *out);

// Shannon spectral efficiency `log2(1 + sinr)` in bits/s/Hz.
double uh_spectral_efficiency(double sinr_linear);

// Run one experiment cell with the default configuration and write the
// per-episode throughput into `throughput` (`episodes` values).
//
// `policy` is one of `constant`, `random`, `genie`, `dqn`; `variant` is a
// DQN state variant (`basic`, `bs`, `build`, `complete`) or null.
//
// # Safety
// Strings must be nul-terminated; `throughput` must hold `len` doubles.
enum UhStatus uh_run_cell(const char *policy,
                          const char *variant,
                          double bs_density_km2,
                          double build_density_km2,
                          uint64_t master_seed,
                          size_t replicate,
                          size_t episodes,
                          double *throughput,
                          size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UAV_HEIGHT_H */
