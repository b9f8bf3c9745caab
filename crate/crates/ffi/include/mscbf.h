#ifndef MSCBF_H
#define MSCBF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Norm selector for [`mscbf_field_norm`].
typedef enum MscbfNorm {
  MSCBF_NORM_H = 0,
  MSCBF_NORM_V = 1,
  // `L^p` norm; the exponent is passed separately.
  MSCBF_NORM_LP = 2,
} MscbfNorm;

// Result codes.
typedef enum MscbfStatus {
  MSCBF_STATUS_OK = 0,
  MSCBF_STATUS_NULL_POINTER = 1,
  MSCBF_STATUS_INVALID_ARGUMENT = 2,
  // The grid cannot dealias the requested product order.
  MSCBF_STATUS_DEALIAS = 3,
  MSCBF_STATUS_BASIS_MISMATCH = 4,
  // The monotonicity shift needs `r > 3` and `beta > 0`.
  MSCBF_STATUS_MONOTONICITY_DOMAIN = 5,
  // The averaging gap `xi` is not positive.
  MSCBF_STATUS_DISSIPATIVITY_GAP = 6,
  MSCBF_STATUS_PANIC = 7,
  MSCBF_STATUS_OTHER = 8,
} MscbfStatus;

// Opaque divergence-free Fourier basis.
typedef struct MscbfBasis MscbfBasis;

// Opaque real velocity field over a basis.
typedef struct MscbfField MscbfField;

// Physical parameters and coupling constants for [`mscbf_validate`].
typedef struct MscbfParams {
  double mu;
  double beta;
  double r;
  double epsilon;
  double l_g;
  double l_sigma2;
} MscbfParams;

// Dissipativity gaps; `admissible` is 1 when every gap is positive.
typedef struct MscbfGaps {
  double gamma;
  double kappa;
  double zeta_mix;
  double xi;
  int32_t admissible;
} MscbfGaps;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len` bytes) and returns the full message length. Returns 0
// when no error was recorded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t mscbf_last_error_message(char *buf, size_t len);

// Basis of all modes with `|k|_inf <= k_max` on a `grid x grid`
// collocation grid that dealiases products of order `order` (at least 2).
//
// # Safety
// `out` must be a valid pointer to receive the handle.
enum MscbfStatus mscbf_basis_new(uint32_t k_max,
                                 uint32_t grid,
                                 uint32_t order,
                                 struct MscbfBasis **out);

// # Safety
// `basis` must be null or a handle from [`mscbf_basis_new`] not yet freed.
void mscbf_basis_free(struct MscbfBasis *basis);

// Number of modes; 0 for a null handle.
//
// # Safety
// `basis` must be null or a live handle.
size_t mscbf_basis_len(const struct MscbfBasis *basis);

// Wavenumber and Stokes eigenvalue of mode `index`.
//
// # Safety
// `basis` must be a live handle; output pointers must be valid.
enum MscbfStatus mscbf_basis_mode(const struct MscbfBasis *basis,
                                  size_t index,
                                  int32_t *k1,
                                  int32_t *k2,
                                  double *lambda);

// Zero field over `basis`.
//
// # Safety
// `basis` must be a live handle and `out` valid.
enum MscbfStatus mscbf_field_zeros(const struct MscbfBasis *basis, struct MscbfField **out);

// Real unit-norm cosine mode along wavenumber `(k1, k2)`.
//
// # Safety
// `basis` must be a live handle and `out` valid.
enum MscbfStatus mscbf_field_unit_mode(const struct MscbfBasis *basis,
                                       int32_t k1,
                                       int32_t k2,
                                       struct MscbfField **out);

// Field from `len` complex amplitudes given as separate real and imaginary
// arrays in basis order. Amplitudes must satisfy `c(-k) = conj(c(k))`.
//
// # Safety
// `basis` must be a live handle, `re`/`im` must point to `len` doubles and `out` be valid.
enum MscbfStatus mscbf_field_from_coeffs(const struct MscbfBasis *basis,
                                         const double *re,
                                         const double *im,
                                         size_t len,
                                         struct MscbfField **out);

// Copies the amplitudes into `re`/`im`, which must hold `len` entries
// (the basis length).
//
// # Safety
// `field` must be a live handle; `re`/`im` must point to `len` writable doubles.
enum MscbfStatus mscbf_field_coeffs(const struct MscbfField *field,
                                    double *re,
                                    double *im,
                                    size_t len);

// # Safety
// `field` must be null or a live handle.
void mscbf_field_free(struct MscbfField *field);

// `H`, `V` or `L^p` norm (`p` is used only for [`MscbfNorm::Lp`]).
//
// # Safety
// `field` must be a live handle and `out` valid.
enum MscbfStatus mscbf_field_norm(const struct MscbfField *field,
                                  enum MscbfNorm kind,
                                  double p,
                                  double *out);

// `L^2` inner product.
//
// # Safety
// `u`, `v` must be live handles over the same basis and `out` valid.
enum MscbfStatus mscbf_field_inner(const struct MscbfField *u,
                                   const struct MscbfField *v,
                                   double *out);

// Stokes operator `A u`.
//
// # Safety
// `u` must be a live handle and `out` valid.
enum MscbfStatus mscbf_apply_stokes(const struct MscbfField *u, struct MscbfField **out);

// Convection `B(u, v)`.
//
// # Safety
// `u`, `v` must be live handles and `out` valid.
enum MscbfStatus mscbf_apply_convection(const struct MscbfField *u,
                                        const struct MscbfField *v,
                                        struct MscbfField **out);

// Damping `C(u)` with exponent `r`.
//
// # Safety
// `u` must be a live handle and `out` valid.
enum MscbfStatus mscbf_apply_damping(const struct MscbfField *u, double r, struct MscbfField **out);

// `G(u) = mu A u + B(u, u) + beta C(u)`.
//
// # Safety
// `u` must be a live handle and `out` valid.
enum MscbfStatus mscbf_apply_g(const struct MscbfField *u,
                               double mu,
                               double beta,
                               double r,
                               struct MscbfField **out);

// Dissipativity gaps of the given constants. Returns
// [`MscbfStatus::DissipativityGap`] (with `out` filled) when `xi <= 0`.
//
// # Safety
// `params` and `out` must be valid pointers.
enum MscbfStatus mscbf_validate(const struct MscbfParams *params, struct MscbfGaps *out);

// Shift `eta` that makes `G + eta I` monotone (`r > 3`, `beta > 0`).
//
// # Safety
// `out` must be valid.
enum MscbfStatus mscbf_monotonicity_constant(double mu, double beta, double r, double *out);

// Library version as a static NUL-terminated string.
const char *mscbf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSCBF_H */
