// Runtime dispatch between the scalar reference kernels and the AVX2
// variants.  Selection happens once, from CPU flags; tests may force a
// specific backend to compare outputs on identical inputs.

#include "nsf/kernels.hpp"

namespace nsf::simd {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const detail::Vtable* pick_default() {
  if (const detail::Vtable* t = detail::avx2_vtable(); t && cpu_has_avx2())
    return t;
  return &detail::scalar_vtable();
}

const detail::Vtable*& table() {
  static const detail::Vtable* t = pick_default();
  return t;
}

}  // namespace

Backend active_backend() {
  return table() == &detail::scalar_vtable() ? Backend::scalar : Backend::avx2;
}

bool force_backend(Backend b) {
  if (b == Backend::scalar) {
    table() = &detail::scalar_vtable();
    return true;
  }
  if (const detail::Vtable* t = detail::avx2_vtable(); t && cpu_has_avx2()) {
    table() = t;
    return true;
  }
  return false;
}

void reset_backend() { table() = pick_default(); }

double sum(const double* a, size_t n) { return table()->sum(a, n); }

double sum_squares(const double* a, size_t n) {
  return table()->sum_squares(a, n);
}

double dot(const double* a, const double* b, size_t n) {
  return table()->dot(a, b, n);
}

void square(const double* a, double* out, size_t n) {
  table()->square(a, out, n);
}

void subtract(const double* a, const double* b, double* out, size_t n) {
  table()->subtract(a, b, out, n);
}

void blend(const double* a, const double* b, const double* w, double* out,
           size_t n) {
  table()->blend(a, b, w, out, n);
}

void select_by_key(const double* a, const double* b, const double* key_a,
                   const double* key_b, double* out, size_t n) {
  table()->select_by_key(a, b, key_a, key_b, out, n);
}

void scale_complex(double* spectrum, const double* window, size_t n) {
  table()->scale_complex(spectrum, window, n);
}

void vexp(const double* x, double* out, size_t n) {
  table()->vexp(x, out, n);
}

void gmm_posteriors_shared(const double* c, size_t n, int states,
                           const double* prior, const double* var,
                           double* const* post, double* density) {
  table()->gmm_posteriors_shared(c, n, states, prior, var, post, density);
}

void gmm_posteriors_fields(const double* c, size_t n, int states,
                           const double* const* prior, const double* const* var,
                           const double* const* lik, double* const* post) {
  table()->gmm_posteriors_fields(c, n, states, prior, var, lik, post);
}

}  // namespace nsf::simd
