#ifndef IPS_H
#define IPS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum IpsStatus {
  IPS_STATUS_OK = 0,
  IPS_STATUS_NULL_POINTER = 1,
  IPS_STATUS_INVALID_ARGUMENT = 2,
  IPS_STATUS_INVALID_UTF8 = 3,
  IPS_STATUS_INVARIANT_VIOLATED = 4,
  IPS_STATUS_IO = 5,
  IPS_STATUS_PANIC = 6,
} IpsStatus;

// A model on a lattice.
typedef struct IpsModel IpsModel;

// Binomial proportion with a 95% Wilson interval.
typedef struct IpsProportion {
  double estimate;
  double lo;
  double hi;
} IpsProportion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ips_version(void);

// Copies the last error message of this thread into `buf` (truncated and
// NUL-terminated) and returns the full message length, or 0 if there is
// none. Passing a null `buf` only queries the length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t ips_last_error_message(char *buf, size_t len);

// Creates a named model (`contact`, `voter`, `ising`, ...) on the torus of
// dimension `dim` and side `side` (a ring for `dim == 1`). `params_json`
// may be null or a JSON object such as `{"lambda": 2.0}`.
//
// # Safety
// `name` must be a NUL-terminated string, `params_json` null or one, and
// `out` a valid pointer.
enum IpsStatus ips_model_new(const char *name,
                             const char *params_json,
                             size_t dim,
                             size_t side,
                             struct IpsModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must be null or a handle from [`ips_model_new`] not yet freed.
void ips_model_free(struct IpsModel *model);

// Number of sites, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ips_model_n_sites(const struct IpsModel *model);

// Number of local states, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uint32_t ips_model_alphabet(const struct IpsModel *model);

// Runs the model for time `t` from `x0` on a graphical representation
// sampled with `seed` and writes the final configuration to `out`. Both
// arrays hold `n` site states and `n` must equal the number of sites.
//
// # Safety
// `x0` and `out` must be valid for `n` bytes.
enum IpsStatus ips_model_evolve(const struct IpsModel *model,
                                const uint8_t *x0,
                                size_t n,
                                double t,
                                uint64_t seed,
                                uint8_t *out);

// Survival proxy of the one-dimensional contact process from a single
// infected site on a ring of `len` sites up to time `horizon`.
//
// # Safety
// `out` must be a valid pointer.
enum IpsStatus ips_contact_survival(double lambda,
                                    size_t len,
                                    double horizon,
                                    size_t replicas,
                                    uint64_t seed,
                                    struct IpsProportion *out);

// Runs an experiment as the command line tool would (`command` is a
// subcommand name such as `"percolation"`, `params_json` its parameters)
// and returns the CSV body in `*out_csv`, to be released with
// [`ips_string_free`]. A checked invariant that fails still returns the CSV
// together with `INVARIANT_VIOLATED`.
//
// # Safety
// `command` must be a NUL-terminated string, `params_json` null or one, and
// `out_csv` a valid pointer.
enum IpsStatus ips_run(const char *command, const char *params_json, uint64_t seed, char **out_csv);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from [`ips_run`] not yet freed.
void ips_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IPS_H */
