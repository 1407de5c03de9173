#pragma once

// Independent transcription of the local EM update rules, written as plain
// per-pixel loops over circular windows.  Serves as the oracle that the
// box-sum accelerated production code is checked against.

#include <cmath>
#include <vector>

#include "nsf/gridops.hpp"
#include "nsf/mchmm.hpp"
#include "nsf/nsst.hpp"

namespace testsupport {

inline double ref_gauss(double c, double var) {
  return std::exp(-0.5 * c * c / var) / std::sqrt(2.0 * M_PI * var);
}

// Similarity weight between window member l and window center i:
// exp(-(v_l - v_i)^2 / (2 * var_window(i) + eps)), with the variance taken
// over the (2r+1)^2 window centered on i.
inline double ref_kernel_weight(const std::vector<double>& v, int w, int h,
                                int cx, int cy, int lx, int ly, int radius,
                                double eps) {
  double sum = 0.0, sum2 = 0.0;
  int cnt = 0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double val =
          v[size_t(nsf::wrap(cy + dy, h)) * w + nsf::wrap(cx + dx, w)];
      sum += val;
      sum2 += val * val;
      ++cnt;
    }
  const double mean = sum / cnt;
  const double var = std::max(0.0, sum2 / cnt - mean * mean);
  const double d = v[size_t(ly) * w + lx] - v[size_t(cy) * w + cx];
  return std::exp(-d * d / (2.0 * var + eps));
}

// Posterior of each state given coefficient and context at every pixel.
inline nsf::PosteriorField ref_e_step_local(const nsf::Subband& s,
                                            const nsf::MchmmParams& params) {
  const int n = params.states();
  nsf::PosteriorField post(s.width, s.height, n);
  for (size_t i = 0; i < s.size(); ++i) {
    std::vector<double> numer(size_t(n));
    double total = 0.0;
    for (int m = 0; m < n; ++m) {
      numer[size_t(m)] = params.prior.plane(m)[i] * params.ctx_lik.plane(m)[i] *
                         ref_gauss(s.coeffs[i], params.var.plane(m)[i]);
      total += numer[size_t(m)];
    }
    for (int m = 0; m < n; ++m)
      post.plane(m)[i] = total < 1e-300 ? 1.0 / n : numer[size_t(m)] / total;
  }
  return post;
}

// Windowed parameter updates from the current posterior.
inline nsf::MchmmParams ref_m_step_local(const nsf::Subband& s,
                                         const nsf::PosteriorField& post,
                                         const std::vector<double>& v_field,
                                         const nsf::MchmmParams& prev,
                                         int radius, double eps) {
  const int n = post.states;
  const int w = s.width, h = s.height;
  const double cnt = double(2 * radius + 1) * double(2 * radius + 1);

  nsf::MchmmParams params{nsf::PlaneField(w, h, n), nsf::PlaneField(w, h, n),
                          nsf::PlaneField(w, h, n, 1.0)};

  for (int m = 0; m < n; ++m)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t i = size_t(y) * w + x;
        double resp = 0.0, energy = 0.0, weighted = 0.0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx) {
            const int lx = nsf::wrap(x + dx, w), ly = nsf::wrap(y + dy, h);
            const size_t l = size_t(ly) * w + lx;
            const double p = post.plane(m)[l];
            resp += p;
            energy += s.coeffs[l] * s.coeffs[l] * p;
            weighted +=
                ref_kernel_weight(v_field, w, h, x, y, lx, ly, radius, eps) * p;
          }
        params.prior.plane(m)[i] = resp / cnt;
        params.var.plane(m)[i] =
            resp > 0.0 ? std::max(energy / resp, 1e-12) : prev.var.plane(m)[i];
        params.ctx_lik.plane(m)[i] =
            resp > 0.0 ? weighted / resp : prev.ctx_lik.plane(m)[i];
      }
  return params;
}

}  // namespace testsupport
