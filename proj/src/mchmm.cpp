#include "nsf/mchmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "nsf/error.hpp"
#include "nsf/gridops.hpp"
#include "nsf/kernels.hpp"

namespace nsf {

namespace {

constexpr double kVarFloor = 1e-12;
constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_subband(const Subband& s) {
  if (s.width <= 0 || s.height <= 0 ||
      s.coeffs.size() != size_t(s.width) * size_t(s.height))
    fail(ErrorCode::invalid_parameter, "malformed subband");
}

std::vector<const double*> const_planes(const PlaneField& f) {
  std::vector<const double*> p(static_cast<size_t>(f.states));
  for (int m = 0; m < f.states; ++m) p[size_t(m)] = f.plane(m);
  return p;
}

std::vector<double*> mut_planes(PlaneField& f) {
  std::vector<double*> p(static_cast<size_t>(f.states));
  for (int m = 0; m < f.states; ++m) p[size_t(m)] = f.plane(m);
  return p;
}

double max_rel_change(const double* a, const double* b, size_t n) {
  double worst = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double rel = std::abs(a[i] - b[i]) / std::max(std::abs(a[i]), 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

// Precomputed similarity weights between each coefficient and its window:
//   w(i, l) = exp(-(v_l - v_i)^2 / (2 * var_w(i) + eps))
// where var_w(i) is the population variance of v over the window around i.
// Stored as one (2r+1)^2 stripe per center.
std::vector<double> kernel_weight_slab(const std::vector<double>& v, int width,
                                       int height, int radius, double eps) {
  const int win = 2 * radius + 1;
  const size_t wn = size_t(win) * size_t(win);
  const size_t n = size_t(width) * size_t(height);
  if (n * wn > (size_t(1) << 28))
    fail(ErrorCode::invalid_parameter, "context window too large to localize");

  std::vector<double> v2(n);
  simd::square(v.data(), v2.data(), n);
  std::vector<double> s1 = box_sum_circular(v.data(), width, height, radius);
  std::vector<double> s2 = box_sum_circular(v2.data(), width, height, radius);
  const double inv_cnt = 1.0 / double(wn);

  std::vector<double> slab(n * wn);
  for (int y = 0; y < height; ++y) {
    const bool y_in = y >= radius && y < height - radius;
    for (int x = 0; x < width; ++x) {
      const size_t i = size_t(y) * width + x;
      const double mean = s1[i] * inv_cnt;
      const double varw = std::max(0.0, s2[i] * inv_cnt - mean * mean);
      const double inv = -1.0 / (2.0 * varw + eps);
      const double vc = v[i];
      double* out = slab.data() + i * wn;
      if (y_in && x >= radius && x < width - radius) {
        for (int uy = 0; uy < win; ++uy) {
          const double* row = v.data() + size_t(y - radius + uy) * width +
                              (x - radius);
          double* orow = out + size_t(uy) * win;
          for (int ux = 0; ux < win; ++ux) {
            const double d = row[ux] - vc;
            orow[ux] = d * d * inv;
          }
        }
      } else {
        for (int uy = 0; uy < win; ++uy) {
          const double* row =
              v.data() + size_t(wrap(y - radius + uy, height)) * width;
          double* orow = out + size_t(uy) * win;
          for (int ux = 0; ux < win; ++ux) {
            const double d = row[wrap(x - radius + ux, width)] - vc;
            orow[ux] = d * d * inv;
          }
        }
      }
      simd::vexp(out, out, wn);
    }
  }
  return slab;
}

// out[m][i] = sum over the window of w(i, l) * post[m][l], divided by the
// windowed responsibility sum denom[m][i].  Where the denominator vanishes
// the state is locally dead: out takes fallback[m][i], or 1 when fallback
// is null.
void kernel_weighted_likelihood(const double* slab, const PlaneField& post,
                                const std::vector<std::vector<double>>& denom,
                                const double* const* fallback, int radius,
                                PlaneField& out) {
  const int width = post.width, height = post.height;
  const int win = 2 * radius + 1;
  const size_t wn = size_t(win) * size_t(win);

  for (int m = 0; m < post.states; ++m) {
    const double* pm = post.plane(m);
    const double* dn = denom[size_t(m)].data();
    const double* fb = fallback ? fallback[m] : nullptr;
    double* om = out.plane(m);
    for (int y = 0; y < height; ++y) {
      const bool y_in = y >= radius && y < height - radius;
      for (int x = 0; x < width; ++x) {
        const size_t i = size_t(y) * width + x;
        const double* wrow = slab + i * wn;
        double acc = 0.0;
        if (y_in && x >= radius && x < width - radius) {
          for (int uy = 0; uy < win; ++uy) {
            const double* p = pm + size_t(y - radius + uy) * width + (x - radius);
            const double* ws = wrow + size_t(uy) * win;
            for (int ux = 0; ux < win; ++ux) acc += ws[ux] * p[ux];
          }
        } else {
          for (int uy = 0; uy < win; ++uy) {
            const double* p = pm + size_t(wrap(y - radius + uy, height)) * width;
            const double* ws = wrow + size_t(uy) * win;
            for (int ux = 0; ux < win; ++ux)
              acc += ws[ux] * p[wrap(x - radius + ux, width)];
          }
        }
        om[i] = dn[i] > 0.0 ? acc / dn[i] : (fb ? fb[i] : 1.0);
      }
    }
  }
}

void check_field_match(const Subband& s, const PlaneField& f,
                       const char* what) {
  if (f.width != s.width || f.height != s.height || f.states < 1 ||
      f.data.size() != size_t(f.states) * f.plane_size())
    fail(ErrorCode::invalid_parameter,
         std::string(what) + " does not match the subband");
}

MchmmParams localize_impl(const Subband& s, const PosteriorField& post,
                          const GlobalParams& gp, int radius,
                          const double* slab) {
  const int n = post.states;
  const size_t sz = post.plane_size();
  const int win = 2 * radius + 1;
  const double inv_cnt = 1.0 / (double(win) * double(win));

  MchmmParams params{PlaneField(s.width, s.height, n),
                     PlaneField(s.width, s.height, n),
                     PlaneField(s.width, s.height, n, 1.0)};

  std::vector<double> c2(sz);
  simd::square(s.coeffs.data(), c2.data(), sz);

  std::vector<std::vector<double>> boxes(static_cast<size_t>(n));
  std::vector<double> weighted(sz);
  for (int m = 0; m < n; ++m) {
    boxes[size_t(m)] =
        box_sum_circular(post.plane(m), s.width, s.height, radius);
    double* prior = params.prior.plane(m);
    for (size_t i = 0; i < sz; ++i) prior[i] = boxes[size_t(m)][i] * inv_cnt;

    const double* pm = post.plane(m);
    for (size_t i = 0; i < sz; ++i) weighted[i] = pm[i] * c2[i];
    std::vector<double> esum =
        box_sum_circular(weighted.data(), s.width, s.height, radius);
    double* var = params.var.plane(m);
    for (size_t i = 0; i < sz; ++i)
      var[i] = boxes[size_t(m)][i] > 0.0
                   ? std::max(esum[i] / boxes[size_t(m)][i], kVarFloor)
                   : gp.var[size_t(m)];
  }

  kernel_weighted_likelihood(slab, post, boxes, nullptr, radius,
                             params.ctx_lik);
  return params;
}

MchmmParams m_step_local_impl(const Subband& s, const PosteriorField& post,
                              const MchmmParams& prev, int radius,
                              const double* slab) {
  const int n = post.states;
  const size_t sz = post.plane_size();
  const int win = 2 * radius + 1;
  const double inv_cnt = 1.0 / (double(win) * double(win));

  MchmmParams params{PlaneField(s.width, s.height, n),
                     PlaneField(s.width, s.height, n),
                     PlaneField(s.width, s.height, n, 1.0)};

  std::vector<double> c2(sz);
  simd::square(s.coeffs.data(), c2.data(), sz);

  std::vector<std::vector<double>> boxes(static_cast<size_t>(n));
  std::vector<double> weighted(sz);
  for (int m = 0; m < n; ++m) {
    boxes[size_t(m)] =
        box_sum_circular(post.plane(m), s.width, s.height, radius);
    double* prior = params.prior.plane(m);
    for (size_t i = 0; i < sz; ++i) prior[i] = boxes[size_t(m)][i] * inv_cnt;

    const double* pm = post.plane(m);
    for (size_t i = 0; i < sz; ++i) weighted[i] = pm[i] * c2[i];
    std::vector<double> esum =
        box_sum_circular(weighted.data(), s.width, s.height, radius);
    const double* pv = prev.var.plane(m);
    double* var = params.var.plane(m);
    for (size_t i = 0; i < sz; ++i)
      var[i] = boxes[size_t(m)][i] > 0.0
                   ? std::max(esum[i] / boxes[size_t(m)][i], kVarFloor)
                   : pv[i];
  }

  auto fb = const_planes(prev.ctx_lik);
  kernel_weighted_likelihood(slab, post, boxes, fb.data(), radius,
                             params.ctx_lik);
  return params;
}

}  // namespace

void MchmmConfig::validate() const {
  if (num_states < 2 || num_states > simd::kMaxStates)
    fail(ErrorCode::invalid_parameter,
         "state count must be between 2 and " +
             std::to_string(simd::kMaxStates));
  if (window_radius.empty())
    fail(ErrorCode::invalid_parameter, "window_radius must not be empty");
  for (int r : window_radius)
    if (r < 0)
      fail(ErrorCode::invalid_parameter, "window radius must be >= 0");
  if (max_global_iters < 1 || max_local_iters < 1)
    fail(ErrorCode::invalid_parameter, "iteration limits must be >= 1");
  if (!(convergence_tol > 0.0) || !std::isfinite(convergence_tol))
    fail(ErrorCode::invalid_parameter, "convergence_tol must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    fail(ErrorCode::invalid_parameter, "epsilon must be positive");
  if (noise_variance &&
      (!std::isfinite(*noise_variance) || *noise_variance < 0.0))
    fail(ErrorCode::invalid_parameter, "noise_variance must be >= 0");
}

int MchmmConfig::radius_for_scale(int scale) const {
  if (scale < 0) fail(ErrorCode::invalid_parameter, "negative scale index");
  const size_t idx = std::min(size_t(scale), window_radius.size() - 1);
  return window_radius[idx];
}

double gaussian_density(double c, double variance) {
  if (!std::isfinite(variance) || variance <= 0.0)
    fail(ErrorCode::invalid_parameter, "variance must be positive");
  return std::exp(-0.5 * c * c / variance) / std::sqrt(kTwoPi * variance);
}

double estimate_noise_variance(const Subband& s) {
  check_subband(s);
  std::vector<double> mag(s.coeffs.size());
  for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(s.coeffs[i]);

  const size_t n = mag.size();
  const size_t hi = n / 2;
  std::nth_element(mag.begin(), mag.begin() + hi, mag.end());
  double med = mag[hi];
  if (n % 2 == 0) {
    // even count: average the two central order statistics
    std::nth_element(mag.begin(), mag.begin() + (hi - 1), mag.begin() + hi);
    med = 0.5 * (med + mag[hi - 1]);
  }
  const double sigma = med / 0.6745;
  return std::max(sigma * sigma, kVarFloor);
}

GlobalInit init_global(const Subband& s, const MchmmConfig& cfg) {
  cfg.validate();
  check_subband(s);
  const int n = cfg.num_states;

  GlobalInit init;
  init.noise_variance = std::max(
      cfg.noise_variance ? *cfg.noise_variance : estimate_noise_variance(s),
      kVarFloor);

  const double delta2 =
      simd::sum_squares(s.coeffs.data(), s.size()) / double(s.size());
  const double span = 2.0 * delta2 - 2.0 * init.noise_variance;
  init.noise_floor_warning = span <= 0.0;
  const double slope = std::max(span, 0.0) / double(n - 1);

  init.params.prior.assign(size_t(n), 1.0 / double(n));
  init.params.var.resize(size_t(n));
  for (int m = 0; m < n; ++m)
    init.params.var[size_t(m)] =
        std::max(init.noise_variance + slope * double(m), kVarFloor);
  return init;
}

PosteriorField e_step_global(const Subband& s, const GlobalParams& gp,
                             double* loglik) {
  check_subband(s);
  const int n = int(gp.prior.size());
  if (n < 1 || gp.var.size() != gp.prior.size())
    fail(ErrorCode::invalid_parameter, "malformed global parameters");
  for (double v : gp.var)
    if (!std::isfinite(v) || v <= 0.0)
      fail(ErrorCode::invalid_parameter, "variance must be positive");

  PosteriorField post(s.width, s.height, n);
  auto planes = mut_planes(post);
  std::vector<double> density;
  double* dptr = nullptr;
  if (loglik) {
    density.resize(s.size());
    dptr = density.data();
  }
  simd::gmm_posteriors_shared(s.coeffs.data(), s.size(), n, gp.prior.data(),
                              gp.var.data(), planes.data(), dptr);
  if (loglik) {
    double ll = 0.0;
    for (double d : density) ll += std::log(d);
    *loglik = ll;
  }
  return post;
}

GlobalParams m_step_global(const Subband& s, const PosteriorField& post,
                           const GlobalParams& prev) {
  check_subband(s);
  check_field_match(s, post, "posterior");
  if (prev.prior.size() != size_t(post.states) ||
      prev.var.size() != size_t(post.states))
    fail(ErrorCode::invalid_parameter, "previous parameters mismatch");

  const size_t sz = post.plane_size();
  std::vector<double> c2(sz);
  simd::square(s.coeffs.data(), c2.data(), sz);

  GlobalParams next;
  next.prior.resize(size_t(post.states));
  next.var.resize(size_t(post.states));
  for (int m = 0; m < post.states; ++m) {
    const double resp = simd::sum(post.plane(m), sz);
    next.prior[size_t(m)] = resp / double(sz);
    next.var[size_t(m)] =
        resp > 0.0 ? std::max(simd::dot(post.plane(m), c2.data(), sz) / resp,
                              kVarFloor)
                   : prev.var[size_t(m)];
  }
  return next;
}

MchmmParams localize(const Subband& s, const PosteriorField& post_global,
                     const std::vector<double>& v_field,
                     const GlobalParams& gp, int radius, double epsilon) {
  check_subband(s);
  check_field_match(s, post_global, "posterior");
  if (v_field.size() != s.size())
    fail(ErrorCode::invalid_parameter, "context field size mismatch");
  if (gp.var.size() != size_t(post_global.states))
    fail(ErrorCode::invalid_parameter, "global parameters mismatch");
  if (radius < 0 || !(epsilon > 0.0))
    fail(ErrorCode::invalid_parameter, "bad localization parameters");

  std::vector<double> slab =
      kernel_weight_slab(v_field, s.width, s.height, radius, epsilon);
  return localize_impl(s, post_global, gp, radius, slab.data());
}

PosteriorField e_step_local(const Subband& s, const MchmmParams& params) {
  check_subband(s);
  check_field_match(s, params.prior, "prior");
  check_field_match(s, params.var, "var");
  check_field_match(s, params.ctx_lik, "ctx_lik");

  PosteriorField post(s.width, s.height, params.states());
  auto out = mut_planes(post);
  auto prior = const_planes(params.prior);
  auto var = const_planes(params.var);
  auto lik = const_planes(params.ctx_lik);
  simd::gmm_posteriors_fields(s.coeffs.data(), s.size(), params.states(),
                              prior.data(), var.data(), lik.data(),
                              out.data());
  return post;
}

MchmmParams m_step_local(const Subband& s, const PosteriorField& post,
                         const std::vector<double>& v_field,
                         const MchmmParams& prev, int radius, double epsilon) {
  check_subband(s);
  check_field_match(s, post, "posterior");
  check_field_match(s, prev.prior, "prior");
  if (v_field.size() != s.size())
    fail(ErrorCode::invalid_parameter, "context field size mismatch");
  if (radius < 0 || !(epsilon > 0.0))
    fail(ErrorCode::invalid_parameter, "bad localization parameters");

  std::vector<double> slab =
      kernel_weight_slab(v_field, s.width, s.height, radius, epsilon);
  return m_step_local_impl(s, post, prev, radius, slab.data());
}

TrainResult train(const Subband& s, const std::vector<double>& v_field,
                  const MchmmConfig& cfg, int scale) {
  cfg.validate();
  check_subband(s);
  if (v_field.size() != s.size())
    fail(ErrorCode::invalid_parameter, "context field size mismatch");
  const int radius = cfg.radius_for_scale(scale);

  TrainResult result;
  GlobalInit init = init_global(s, cfg);
  result.noise_variance = init.noise_variance;
  result.noise_floor_warning = init.noise_floor_warning;

  GlobalParams gp = init.params;
  for (int it = 0; it < cfg.max_global_iters; ++it) {
    double ll = 0.0;
    PosteriorField post = e_step_global(s, gp, &ll);
    result.global_loglik.push_back(ll);
    GlobalParams next = m_step_global(s, post, gp);
    const double change = std::max(
        max_rel_change(gp.prior.data(), next.prior.data(), gp.prior.size()),
        max_rel_change(gp.var.data(), next.var.data(), gp.var.size()));
    gp = std::move(next);
    ++result.global_iters;
    if (change < cfg.convergence_tol) break;
  }

  // Posterior consistent with the converged shared parameters seeds the
  // localization.
  PosteriorField post_g = e_step_global(s, gp);
  std::vector<double> slab =
      kernel_weight_slab(v_field, s.width, s.height, radius, cfg.epsilon);
  MchmmParams params = localize_impl(s, post_g, gp, radius, slab.data());

  for (int it = 0; it < cfg.max_local_iters; ++it) {
    PosteriorField post = e_step_local(s, params);
    MchmmParams next = m_step_local_impl(s, post, params, radius, slab.data());
    const double change = std::max(
        {max_rel_change(params.prior.data.data(), next.prior.data.data(),
                        params.prior.data.size()),
         max_rel_change(params.var.data.data(), next.var.data.data(),
                        params.var.data.size()),
         max_rel_change(params.ctx_lik.data.data(), next.ctx_lik.data.data(),
                        params.ctx_lik.data.size())});
    params = std::move(next);
    ++result.local_iters;
    if (change < cfg.convergence_tol) break;
  }

  result.posterior = e_step_local(s, params);
  result.params = std::move(params);
  return result;
}

void dump_model(const MchmmParams& params, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory " + dir.string());

  const std::filesystem::path raw_path = dir / "model.raw";
  std::ofstream out(raw_path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot create " + raw_path.string());
  for (const PlaneField* f : {&params.prior, &params.var, &params.ctx_lik}) {
    std::vector<float> plane(f->data.begin(), f->data.end());
    out.write(reinterpret_cast<const char*>(plane.data()),
              std::streamsize(plane.size() * sizeof(float)));
  }
  if (!out) fail(ErrorCode::io, "write failed for " + raw_path.string());

  nlohmann::json j{{"width", params.width()},
                   {"height", params.height()},
                   {"states", params.states()},
                   {"planes", {"prior", "var", "ctx_lik"}},
                   {"dtype", "float32"},
                   {"layout", "plane-major"}};
  std::ofstream js(dir / "model.json");
  if (!js) fail(ErrorCode::io, "cannot create model.json");
  js << j.dump(2) << "\n";
}

}  // namespace nsf
