#pragma once

#include <cstddef>

// Hot inner loops shared by the transform, model training, and fusion
// stages.  Every kernel has a portable scalar implementation and, on
// x86-64, an AVX2 variant; the variant is picked once from CPU flags and
// can be overridden so tests can compare backends on identical inputs.

namespace nsf::simd {

enum class Backend { scalar, avx2 };

Backend active_backend();

// Forces a backend; returns false (leaving dispatch unchanged) when the
// running CPU lacks it.
bool force_backend(Backend b);

// Restores CPU-flag based selection.
void reset_backend();

double sum(const double* a, size_t n);
double sum_squares(const double* a, size_t n);
double dot(const double* a, const double* b, size_t n);
void square(const double* a, double* out, size_t n);
void subtract(const double* a, const double* b, double* out, size_t n);

// out[i] = w[i] * a[i] + (1 - w[i]) * b[i]
void blend(const double* a, const double* b, const double* w, double* out,
           size_t n);

// out[i] = key_a[i] >= key_b[i] ? a[i] : b[i]
void select_by_key(const double* a, const double* b, const double* key_a,
                   const double* key_b, double* out, size_t n);

// Scales an interleaved complex spectrum by a real window, in place.
void scale_complex(double* spectrum, const double* window, size_t n);

// out[i] = exp(x[i]).  Inputs are clamped to +-708.25 first, so results
// match std::exp to a couple of ulp away from the underflow/overflow edges.
void vexp(const double* x, double* out, size_t n);

// Mixture densities below this are treated as numerical underflow and the
// affected coefficient falls back to uniform responsibilities.
inline constexpr double kUnderflowEps = 1e-300;

// Maximum mixture size the kernels accept.
inline constexpr int kMaxStates = 16;

// Responsibilities of a zero-mean Gaussian mixture with one shared
// parameter set:
//
//   post[m][i] = prior[m] * gauss(c[i]; var[m]) / density[i]
//   density[i] = sum_m prior[m] * gauss(c[i]; var[m])
//
// Rows of post sum to 1; coefficients whose density underflows get uniform
// responsibilities.  When density is non-null it receives the raw mixture
// density so the caller can accumulate log-likelihood.
void gmm_posteriors_shared(const double* c, size_t n, int states,
                           const double* prior, const double* var,
                           double* const* post, double* density);

// Same E-step with per-coefficient parameter planes and an optional extra
// per-coefficient likelihood factor per state (lik == nullptr means ones).
void gmm_posteriors_fields(const double* c, size_t n, int states,
                           const double* const* prior, const double* const* var,
                           const double* const* lik, double* const* post);

namespace detail {

struct Vtable {
  double (*sum)(const double*, size_t);
  double (*sum_squares)(const double*, size_t);
  double (*dot)(const double*, const double*, size_t);
  void (*square)(const double*, double*, size_t);
  void (*subtract)(const double*, const double*, double*, size_t);
  void (*blend)(const double*, const double*, const double*, double*, size_t);
  void (*select_by_key)(const double*, const double*, const double*,
                        const double*, double*, size_t);
  void (*scale_complex)(double*, const double*, size_t);
  void (*vexp)(const double*, double*, size_t);
  void (*gmm_posteriors_shared)(const double*, size_t, int, const double*,
                                const double*, double* const*, double*);
  void (*gmm_posteriors_fields)(const double*, size_t, int,
                                const double* const*, const double* const*,
                                const double* const*, double* const*);
};

const Vtable& scalar_vtable();
const Vtable* avx2_vtable();  // nullptr when not compiled in

}  // namespace detail

}  // namespace nsf::simd
