#ifndef DIRAC_VACUUM_H
#define DIRAC_VACUUM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes; the nonzero values match the command-line exit codes.
typedef enum DvStatus {
  DV_STATUS_OK = 0,
  DV_STATUS_OTHER = 1,
  DV_STATUS_INVALID_ARGUMENT = 2,
  DV_STATUS_MAX_ITER_EXCEEDED = 3,
  DV_STATUS_DEGENERATE = 4,
  DV_STATUS_CHARGE_UNREACHABLE = 5,
  DV_STATUS_LANDAU_POLE_VIOLATION = 6,
  DV_STATUS_NONLINEAR_REGIME = 7,
  DV_STATUS_SADDLE_FAILURE = 8,
  DV_STATUS_DEGENERATE_MASSES = 9,
  DV_STATUS_NULL_POINTER = 10,
  DV_STATUS_PANIC = 11,
} DvStatus;

// Charge density handle (Fourier coefficients on the difference grid).
typedef struct DvDensity DvDensity;

// Momentum lattice handle.
typedef struct DvLattice DvLattice;

// Converged SCF solution handle.
typedef struct DvScfResult DvScfResult;

// Solver parameters for [`dv_scf_solve`].
typedef struct DvScfConfig {
  double mixing;
  double tol;
  size_t max_iter;
  double kernel_eps;
} DvScfConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *dv_last_error_message(void);

// Builds the lattice of modes (2 pi / L) n with |n_i| <= N and |k| <= cutoff.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum DvStatus dv_lattice_new(double box_length,
                             int32_t max_index,
                             double cutoff,
                             struct DvLattice **out);

// # Safety
// `lat` must be null or a handle from [`dv_lattice_new`] not yet freed.
void dv_lattice_free(struct DvLattice *lat);

// Number of momentum modes, or 0 for a null handle.
//
// # Safety
// `lat` must be null or a live lattice handle.
size_t dv_lattice_num_modes(const struct DvLattice *lat);

// Zero density on the lattice's difference grid.
//
// # Safety
// `lat` must be a live lattice handle and `out` writable.
enum DvStatus dv_density_zeros(const struct DvLattice *lat, struct DvDensity **out);

// Gaussian profile nu_q = Z L^-3 exp(-sigma^2 |q|^2 / 2).
//
// # Safety
// `lat` must be a live lattice handle and `out` writable.
enum DvStatus dv_density_gaussian(const struct DvLattice *lat,
                                  double charge,
                                  double width,
                                  struct DvDensity **out);

// Parses the density JSON document.
//
// # Safety
// `json` must be a NUL-terminated UTF-8 string and `out` writable.
enum DvStatus dv_density_from_json(const char *json, struct DvDensity **out);

// Serializes a density; release the string with [`dv_string_free`].
//
// # Safety
// `d` must be a live density handle and `out` writable.
enum DvStatus dv_density_to_json(const struct DvDensity *d, char **out);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void dv_string_free(char *s);

// # Safety
// `d` must be null or a live density handle.
void dv_density_free(struct DvDensity *d);

// Box Coulomb form D(f, g).
//
// # Safety
// `f`, `g` must be live density handles and `out` writable.
enum DvStatus dv_coulomb_inner(const struct DvDensity *f, const struct DvDensity *g, double *out);

// Default solver parameters (mixing 0.3, tol 1e-8, 500 iterations).
struct DvScfConfig dv_scf_config_default(void);

// Unconstrained SCF minimization in the external density `nu`.
//
// # Safety
// `nu`, `lat` must be live handles, `cfg` readable and `out` writable.
enum DvStatus dv_scf_solve(const struct DvDensity *nu,
                           double alpha,
                           const struct DvScfConfig *cfg,
                           const struct DvLattice *lat,
                           double mass,
                           struct DvScfResult **out);

// BDF energy of the solution; NaN for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
double dv_scf_result_energy(const struct DvScfResult *r);

// # Safety
// `r` must be null or a live result handle.
size_t dv_scf_result_iterations(const struct DvScfResult *r);

// Coulomb norm of the last density step; NaN for a null handle.
//
// # Safety
// `r` must be null or a live result handle.
double dv_scf_result_residual(const struct DvScfResult *r);

// Copies the converged vacuum density into a new handle.
//
// # Safety
// `r` must be a live result handle and `out` writable.
enum DvStatus dv_scf_result_density(const struct DvScfResult *r, struct DvDensity **out);

// # Safety
// `r` must be null or a live result handle.
void dv_scf_result_free(struct DvScfResult *r);

// Renormalization constant B(Lambda/m).
//
// # Safety
// `out` must be writable.
enum DvStatus dv_b_constant(double ratio, double *out);

// alpha_ph = alpha / (1 + alpha B).
//
// # Safety
// `out` must be writable.
enum DvStatus dv_renormalize_coupling(double alpha_bare, double b, double *out);

// alpha = alpha_ph / (1 - alpha_ph B); fails at the Landau pole.
//
// # Safety
// `out` must be writable.
enum DvStatus dv_bare_coupling(double alpha_ph, double b, double *out);

// Exact and asymptotic Landau cutoffs.
//
// # Safety
// `exact` and `asymptotic` must be writable.
enum DvStatus dv_landau_cutoff(double alpha_ph, double mass, double *exact, double *asymptotic);

// Pauli-Villars coefficients c1, c2 for masses (m, m1, m2).
//
// # Safety
// `c1` and `c2` must be writable.
enum DvStatus dv_pv_coefficients(double m, double m1, double m2, double *c1, double *c2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIRAC_VACUUM_H */
