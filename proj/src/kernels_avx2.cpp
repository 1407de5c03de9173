// AVX2 + FMA variants of the dispatched kernels.  This translation unit is
// compiled with -mavx2 -mfma on x86-64 and must only be reached through the
// dispatch table after a CPU-flag check.  Remainders shorter than one
// vector are handled with inline scalar code mirroring the reference
// semantics.

#include "nsf/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "nsf/error.hpp"

namespace nsf::simd::detail {

namespace {

constexpr double kExpLo = -708.25;
constexpr double kExpHi = 708.25;
constexpr double kTwoPi = 6.283185307179586476925286766559;

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// exp() for four doubles: range reduction by log2(e) with a two-part
// ln(2), then a degree-2/3 rational approximation of expm1 on the reduced
// interval and reassembly through the exponent bits.  Inputs must already
// be clamped to [kExpLo, kExpHi]; accuracy is within ~2 ulp of std::exp.
inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  __m256d px = _mm256_floor_pd(_mm256_fmadd_pd(x, log2e, _mm256_set1_pd(0.5)));
  __m128i n32 = _mm256_cvtpd_epi32(px);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);

  x = _mm256_fnmadd_pd(px, _mm256_set1_pd(6.93145751953125e-1), x);
  x = _mm256_fnmadd_pd(px, _mm256_set1_pd(1.42860682030941723212e-6), x);
  __m256d xx = _mm256_mul_pd(x, x);

  __m256d pe = _mm256_set1_pd(1.26177193074810590878e-4);
  pe = _mm256_fmadd_pd(pe, xx, _mm256_set1_pd(3.02994407707441961300e-2));
  pe = _mm256_fmadd_pd(pe, xx, _mm256_set1_pd(9.99999999999999999910e-1));
  pe = _mm256_mul_pd(pe, x);

  __m256d qe = _mm256_set1_pd(3.00198505138664455042e-6);
  qe = _mm256_fmadd_pd(qe, xx, _mm256_set1_pd(2.52448340349684104192e-3));
  qe = _mm256_fmadd_pd(qe, xx, _mm256_set1_pd(2.27265548208155028766e-1));
  qe = _mm256_fmadd_pd(qe, xx, _mm256_set1_pd(2.0));

  __m256d r = _mm256_div_pd(pe, _mm256_sub_pd(qe, pe));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  // r * 2^n with n in [-1022, 1022]: build the power from exponent bits.
  __m256i bits = _mm256_slli_epi64(
      _mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(r, _mm256_castsi256_pd(bits));
}

inline __m256d clamp_exp_arg(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(kExpLo));
  return _mm256_min_pd(x, _mm256_set1_pd(kExpHi));
}

double sum_impl(const double* a, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double r = hsum(acc);
  for (; i < n; ++i) r += a[i];
  return r;
}

double sum_squares_impl(const double* a, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(a + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += a[i] * a[i];
  return r;
}

double dot_impl(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double r = hsum(acc);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

void square_impl(const double* a, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(a + i);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(v, v));
  }
  for (; i < n; ++i) out[i] = a[i] * a[i];
}

void subtract_impl(const double* a, const double* b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(
        out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void blend_impl(const double* a, const double* b, const double* w, double* out,
                size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    __m256d vw = _mm256_loadu_pd(w + i);
    __m256d t = _mm256_fnmadd_pd(vw, vb, vb);  // (1 - w) * b
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(vw, va, t));
  }
  for (; i < n; ++i) out[i] = w[i] * a[i] + (1.0 - w[i]) * b[i];
}

void select_by_key_impl(const double* a, const double* b, const double* key_a,
                        const double* key_b, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(key_a + i),
                                 _mm256_loadu_pd(key_b + i), _CMP_GE_OQ);
    _mm256_storeu_pd(out + i,
                     _mm256_blendv_pd(_mm256_loadu_pd(b + i),
                                      _mm256_loadu_pd(a + i), mask));
  }
  for (; i < n; ++i) out[i] = key_a[i] >= key_b[i] ? a[i] : b[i];
}

void scale_complex_impl(double* spectrum, const double* window, size_t n) {
  size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d w2 = _mm256_setr_pd(window[i], window[i], window[i + 1],
                                window[i + 1]);
    __m256d v = _mm256_loadu_pd(spectrum + 2 * i);
    _mm256_storeu_pd(spectrum + 2 * i, _mm256_mul_pd(v, w2));
  }
  for (; i < n; ++i) {
    spectrum[2 * i] *= window[i];
    spectrum[2 * i + 1] *= window[i];
  }
}

void vexp_impl(const double* x, double* out, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, exp4(clamp_exp_arg(_mm256_loadu_pd(x + i))));
  for (; i < n; ++i) {
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
  __m256d norm[kMaxStates], inv2v[kMaxStates];
  double norm_s[kMaxStates], inv2v_s[kMaxStates];
  for (int m = 0; m < states; ++m) {
    norm_s[m] = prior[m] / std::sqrt(kTwoPi * var[m]);
    inv2v_s[m] = -0.5 / var[m];
    norm[m] = _mm256_set1_pd(norm_s[m]);
    inv2v[m] = _mm256_set1_pd(inv2v_s[m]);
  }
  const double uniform = 1.0 / double(states);
  const __m256d vuniform = _mm256_set1_pd(uniform);
  const __m256d veps = _mm256_set1_pd(kUnderflowEps);
  const __m256d vlo = _mm256_set1_pd(kExpLo);

  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d cv = _mm256_loadu_pd(c + i);
    __m256d cc = _mm256_mul_pd(cv, cv);
    __m256d den = _mm256_setzero_pd();
    __m256d p[kMaxStates];
    for (int m = 0; m < states; ++m) {
      __m256d e = _mm256_max_pd(_mm256_mul_pd(inv2v[m], cc), vlo);
      p[m] = _mm256_mul_pd(norm[m], exp4(e));
      den = _mm256_add_pd(den, p[m]);
    }
    if (density) _mm256_storeu_pd(density + i, den);
    __m256d under = _mm256_cmp_pd(den, veps, _CMP_LT_OQ);
    __m256d inv = _mm256_div_pd(_mm256_set1_pd(1.0), den);
    for (int m = 0; m < states; ++m) {
      __m256d r = _mm256_mul_pd(p[m], inv);
      _mm256_storeu_pd(post[m] + i, _mm256_blendv_pd(r, vuniform, under));
    }
  }
  for (; i < n; ++i) {
    const double cc = c[i] * c[i];
    double den = 0.0;
    double p[kMaxStates];
    for (int m = 0; m < states; ++m) {
      double e = inv2v_s[m] * cc;
      e = e < kExpLo ? kExpLo : e;
      p[m] = norm_s[m] * std::exp(e);
      den += p[m];
    }
    if (density) density[i] = den;
    if (den < kUnderflowEps) {
      for (int m = 0; m < states; ++m) post[m][i] = uniform;
    } else {
      for (int m = 0; m < states; ++m) post[m][i] = p[m] / den;
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
  const __m256d vuniform = _mm256_set1_pd(uniform);
  const __m256d veps = _mm256_set1_pd(kUnderflowEps);
  const __m256d vlo = _mm256_set1_pd(kExpLo);
  const __m256d vone = _mm256_set1_pd(1.0);
  const __m256d vhalf = _mm256_set1_pd(-0.5);
  const __m256d vtwopi = _mm256_set1_pd(kTwoPi);

  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d cv = _mm256_loadu_pd(c + i);
    __m256d cc = _mm256_mul_pd(cv, cv);
    __m256d den = _mm256_setzero_pd();
    __m256d p[kMaxStates];
    for (int m = 0; m < states; ++m) {
      __m256d v = _mm256_loadu_pd(var[m] + i);
      __m256d e = _mm256_max_pd(
          _mm256_div_pd(_mm256_mul_pd(vhalf, cc), v), vlo);
      __m256d g = _mm256_div_pd(exp4(e),
                                _mm256_sqrt_pd(_mm256_mul_pd(vtwopi, v)));
      if (lik) g = _mm256_mul_pd(g, _mm256_loadu_pd(lik[m] + i));
      p[m] = _mm256_mul_pd(_mm256_loadu_pd(prior[m] + i), g);
      den = _mm256_add_pd(den, p[m]);
    }
    __m256d under = _mm256_cmp_pd(den, veps, _CMP_LT_OQ);
    __m256d inv = _mm256_div_pd(vone, den);
    for (int m = 0; m < states; ++m) {
      __m256d r = _mm256_mul_pd(p[m], inv);
      _mm256_storeu_pd(post[m] + i, _mm256_blendv_pd(r, vuniform, under));
    }
  }
  for (; i < n; ++i) {
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
      for (int m = 0; m < states; ++m) post[m][i] = p[m] / den;
    }
  }
}

}  // namespace

const Vtable* avx2_vtable() {
  static const Vtable table = {
      sum_impl,          sum_squares_impl,
      dot_impl,          square_impl,
      subtract_impl,     blend_impl,
      select_by_key_impl, scale_complex_impl,
      vexp_impl,         gmm_posteriors_shared_impl,
      gmm_posteriors_fields_impl,
  };
  return &table;
}

}  // namespace nsf::simd::detail

#else  // non-x86 builds fall back to the scalar table

namespace nsf::simd::detail {

const Vtable* avx2_vtable() { return nullptr; }

}  // namespace nsf::simd::detail

#endif
