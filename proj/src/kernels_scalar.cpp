// Portable reference implementations of the dispatched kernels.  These
// define the semantics; the vector variants must agree with them within a
// few ulp on every input.

#include <cmath>

#include "nsf/error.hpp"
#include "nsf/kernels.hpp"

namespace nsf::simd::detail {

namespace {

constexpr double kExpLo = -708.25;
constexpr double kExpHi = 708.25;
constexpr double kTwoPi = 6.283185307179586476925286766559;

double sum_impl(const double* a, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double sum_squares_impl(const double* a, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

double dot_impl(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void square_impl(const double* a, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * a[i];
}

void subtract_impl(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void blend_impl(const double* a, const double* b, const double* w, double* out,
                size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = w[i] * a[i] + (1.0 - w[i]) * b[i];
}

void select_by_key_impl(const double* a, const double* b, const double* key_a,
                        const double* key_b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = key_a[i] >= key_b[i] ? a[i] : b[i];
}

void scale_complex_impl(double* spectrum, const double* window, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    spectrum[2 * i] *= window[i];
    spectrum[2 * i + 1] *= window[i];
  }
}

void vexp_impl(const double* x, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    double v = x[i];
    v = v < kExpLo ? kExpLo : (v > kExpHi ? kExpHi : v);
    out[i] = std::exp(v);
  }
}

void check_states(int states) {
  if (states < 1 || states > kMaxStates)
    fail(ErrorCode::invalid_parameter, "mixture size out of range");
}

void gmm_posteriors_shared_impl(const double* c, size_t n, int states,
                                const double* prior, const double* var,
                                double* const* post, double* density) {
  check_states(states);
  double norm[kMaxStates], inv2v[kMaxStates];
  for (int m = 0; m < states; ++m) {
    norm[m] = prior[m] / std::sqrt(kTwoPi * var[m]);
    inv2v[m] = -0.5 / var[m];
  }
  const double uniform = 1.0 / double(states);
  for (size_t i = 0; i < n; ++i) {
    const double cc = c[i] * c[i];
    double den = 0.0;
    double p[kMaxStates];
    for (int m = 0; m < states; ++m) {
      double e = inv2v[m] * cc;
      e = e < kExpLo ? kExpLo : e;
      p[m] = norm[m] * std::exp(e);
      den += p[m];
    }
    if (density) density[i] = den;
    if (den < kUnderflowEps) {
      for (int m = 0; m < states; ++m) post[m][i] = uniform;
    } else {
      const double inv = 1.0 / den;
      for (int m = 0; m < states; ++m) post[m][i] = p[m] * inv;
    }
  }
}

void gmm_posteriors_fields_impl(const double* c, size_t n, int states,
                                const double* const* prior,
                                const double* const* var,
                                const double* const* lik,
                                double* const* post) {
  check_states(states);
  const double uniform = 1.0 / double(states);
  for (size_t i = 0; i < n; ++i) {
    const double cc = c[i] * c[i];
    double den = 0.0;
    double p[kMaxStates];
    for (int m = 0; m < states; ++m) {
      const double v = var[m][i];
      double e = -0.5 * cc / v;
      e = e < kExpLo ? kExpLo : e;
      double g = std::exp(e) / std::sqrt(kTwoPi * v);
      if (lik) g *= lik[m][i];
      p[m] = prior[m][i] * g;
      den += p[m];
    }
    if (den < kUnderflowEps) {
      for (int m = 0; m < states; ++m) post[m][i] = uniform;
    } else {
      const double inv = 1.0 / den;
      for (int m = 0; m < states; ++m) post[m][i] = p[m] * inv;
    }
  }
}

}  // namespace

const Vtable& scalar_vtable() {
  static const Vtable table = {
      sum_impl,          sum_squares_impl,
      dot_impl,          square_impl,
      subtract_impl,     blend_impl,
      select_by_key_impl, scale_complex_impl,
      vexp_impl,         gmm_posteriors_shared_impl,
      gmm_posteriors_fields_impl,
  };
  return table;
}

}  // namespace nsf::simd::detail
