#include "nsf/context.hpp"

#include <cmath>

#include "nsf/error.hpp"
#include "nsf/gridops.hpp"
#include "nsf/kernels.hpp"

namespace nsf {

namespace {

double sq(double v) { return v * v; }

}  // namespace

void ContextWeights::validate() const {
  for (double w : {direct, diagonal, parent, cousin})
    if (!std::isfinite(w) || w < 0.0)
      fail(ErrorCode::invalid_parameter,
           "context weights must be finite and non-negative");
}

NeighborIndex neighbor_index(int scale, int dir,
                             const DecompositionSpec& spec) {
  spec.validate();
  if (scale < 0 || scale >= spec.levels)
    fail(ErrorCode::out_of_range, "scale index " + std::to_string(scale));
  const int k = spec.directions_per_scale[size_t(scale)];
  if (dir < 0 || dir >= k)
    fail(ErrorCode::out_of_range, "direction index " + std::to_string(dir));

  NeighborIndex idx;
  if (scale > 0) {
    // Directions shrink with the wedge count: child wedge `dir` out of k
    // falls inside coarser wedge floor(dir * k_coarse / k).
    const int k_coarse = spec.directions_per_scale[size_t(scale) - 1];
    idx.parent = {scale - 1, (dir * k_coarse) / k};
  }
  idx.cousins[0] = {scale, wrap(dir - 1, k)};
  idx.cousins[1] = {scale, wrap(dir + 1, k)};
  return idx;
}

double subband_mean_energy(const Subband& s) {
  if (s.size() == 0)
    fail(ErrorCode::invalid_parameter, "mean energy of an empty subband");
  return simd::sum_squares(s.coeffs.data(), s.size()) / double(s.size());
}

std::vector<double> compute_context(const NsstDecomposition& dec, int scale,
                                    int dir, const ContextWeights& w) {
  w.validate();
  const Subband& s = dec.band(scale, dir);
  const NeighborIndex idx = neighbor_index(scale, dir, dec.spec);
  const Subband* parent =
      idx.parent ? &dec.band(idx.parent->first, idx.parent->second) : nullptr;
  const Subband& cous0 = dec.band(idx.cousins[0].first, idx.cousins[0].second);
  const Subband& cous1 = dec.band(idx.cousins[1].first, idx.cousins[1].second);

  const int width = s.width, height = s.height;
  std::vector<int> xm(static_cast<size_t>(width)), xp(static_cast<size_t>(width));
  for (int x = 0; x < width; ++x) {
    xm[size_t(x)] = wrap(x - 1, width);
    xp[size_t(x)] = wrap(x + 1, width);
  }

  std::vector<double> raw(s.size());
  for (int y = 0; y < height; ++y) {
    const double* row = s.coeffs.data() + size_t(y) * width;
    const double* above = s.coeffs.data() + size_t(wrap(y - 1, height)) * width;
    const double* below = s.coeffs.data() + size_t(wrap(y + 1, height)) * width;
    for (int x = 0; x < width; ++x) {
      const size_t i = size_t(y) * width + x;
      const int l = xm[size_t(x)], r = xp[size_t(x)];
      double acc = w.direct * (sq(row[l]) + sq(row[r]) + sq(above[x]) + sq(below[x]));
      acc += w.diagonal * (sq(above[l]) + sq(above[r]) + sq(below[l]) + sq(below[r]));
      if (parent) acc += w.parent * sq(parent->coeffs[i]);
      acc += w.cousin * (sq(cous0.coeffs[i]) + sq(cous1.coeffs[i]));
      raw[i] = acc;
    }
  }
  return raw;
}

double compute_threshold(const NsstDecomposition& dec, int scale, int dir,
                         const ContextWeights& w) {
  w.validate();
  const NeighborIndex idx = neighbor_index(scale, dir, dec.spec);
  const double e_own = subband_mean_energy(dec.band(scale, dir));
  double t = 4.0 * w.direct * e_own + 4.0 * w.diagonal * e_own;
  if (idx.parent)
    t += w.parent *
         subband_mean_energy(dec.band(idx.parent->first, idx.parent->second));
  t += w.cousin *
       (subband_mean_energy(dec.band(idx.cousins[0].first, idx.cousins[0].second)) +
        subband_mean_energy(dec.band(idx.cousins[1].first, idx.cousins[1].second)));
  return t;
}

std::vector<double> soft_context(const std::vector<double>& raw, double t,
                                 double sigma) {
  if (!std::isfinite(t) || !std::isfinite(sigma) || sigma < 0.0)
    fail(ErrorCode::invalid_parameter, "bad soft-context parameters");

  std::vector<double> v(raw.size());
  if (sigma == 0.0) {
    for (size_t i = 0; i < raw.size(); ++i)
      v[i] = raw[i] > t ? 1.0 : (raw[i] < t ? 0.0 : 0.5);
    return v;
  }
  // Half-Gaussian ramp around the threshold, point-symmetric about
  // (t, 1/2):  v = e/2 below t and 1 - e/2 above, e = exp(-((raw-t)/sigma)^2/2).
  const double inv_sigma = 1.0 / sigma;
  for (size_t i = 0; i < raw.size(); ++i) {
    const double z = (raw[i] - t) * inv_sigma;
    v[i] = -0.5 * z * z;
  }
  simd::vexp(v.data(), v.data(), v.size());
  for (size_t i = 0; i < raw.size(); ++i)
    v[i] = raw[i] < t ? 0.5 * v[i] : 1.0 - 0.5 * v[i];
  return v;
}

ContextField compute_context_field(const NsstDecomposition& dec, int scale,
                                   int dir, const ContextWeights& w) {
  const Subband& s = dec.band(scale, dir);
  ContextField f;
  f.width = s.width;
  f.height = s.height;
  f.raw = compute_context(dec, scale, dir, w);
  f.t = compute_threshold(dec, scale, dir, w);
  f.sigma = std::sqrt(population_stats(f.raw.data(), f.raw.size()).var);
  f.v = soft_context(f.raw, f.t, f.sigma);
  return f;
}

}  // namespace nsf
