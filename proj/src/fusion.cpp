#include "nsf/fusion.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "nsf/error.hpp"
#include "nsf/gridops.hpp"
#include "nsf/kernels.hpp"

namespace nsf {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

void check_band(const Subband& s, const char* what) {
  if (s.width <= 0 || s.height <= 0 ||
      s.coeffs.size() != size_t(s.width) * size_t(s.height))
    fail(ErrorCode::invalid_parameter, std::string(what) + ": malformed subband");
}

void check_same_shape(const Subband& a, const Subband& b) {
  if (a.width != b.width || a.height != b.height)
    fail(ErrorCode::invalid_parameter, "subband shapes differ");
}

}  // namespace

void FusionConfig::validate() const {
  decomposition.validate();
  context_weights.validate();
  mchmm.validate();
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0)
    fail(ErrorCode::invalid_parameter, "alpha must lie in [0, 1]");
  if (low_window < 1 || low_window % 2 == 0)
    fail(ErrorCode::invalid_parameter, "low_window must be odd and >= 1");
  if (threads < 0)
    fail(ErrorCode::invalid_parameter, "threads must be >= 0");
}

std::vector<double> regional_energy(const Subband& low, int w_size) {
  check_band(low, "regional_energy");
  if (w_size < 1 || w_size % 2 == 0)
    fail(ErrorCode::invalid_parameter, "window side must be odd and >= 1");
  const int radius = (w_size - 1) / 2;
  std::vector<double> c2(low.size());
  simd::square(low.coeffs.data(), c2.data(), low.size());
  std::vector<double> sums =
      box_sum_circular(c2.data(), low.width, low.height, radius);
  const double inv = 1.0 / (double(w_size) * double(w_size));
  for (double& v : sums) v *= inv;
  return sums;
}

std::vector<double> normalize_energy(const std::vector<double>& le) {
  if (le.empty())
    fail(ErrorCode::invalid_parameter, "normalize_energy of an empty field");
  double lo = le[0], hi = le[0];
  for (double v : le) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out(le.size());
  if (hi == lo) {
    // A flat energy field carries no preference either way.
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  const double inv = 1.0 / (hi - lo);
  for (size_t i = 0; i < le.size(); ++i) out[i] = (le[i] - lo) * inv;
  return out;
}

Subband fuse_low(const Subband& low_a, const Subband& low_b, int w_size) {
  check_band(low_a, "fuse_low");
  check_band(low_b, "fuse_low");
  check_same_shape(low_a, low_b);

  std::vector<double> ml_a = normalize_energy(regional_energy(low_a, w_size));
  std::vector<double> ml_b = normalize_energy(regional_energy(low_b, w_size));
  std::vector<double> w(ml_a.size());
  for (size_t i = 0; i < w.size(); ++i)
    w[i] = 0.5 + 0.5 * (ml_a[i] - ml_b[i]);

  Subband fused(low_a.width, low_a.height);
  simd::blend(low_a.coeffs.data(), low_b.coeffs.data(), w.data(),
              fused.coeffs.data(), fused.size());
  return fused;
}

PlaneField vp(const MchmmParams& params, const PosteriorField& posterior) {
  if (params.width() != posterior.width || params.height() != posterior.height ||
      params.states() != posterior.states)
    fail(ErrorCode::invalid_parameter, "parameters and posterior mismatch");

  PlaneField out(params.width(), params.height(), params.states());
  const size_t sz = out.plane_size();
  for (int m = 0; m < out.states; ++m) {
    const double* var = params.var.plane(m);
    const double* post = posterior.plane(m);
    double* o = out.plane(m);
    for (size_t i = 0; i < sz; ++i) o[i] = var[i] * post[i];
  }
  return out;
}

std::pair<PlaneField, PlaneField> vpm(const PlaneField& vp_a,
                                      const PlaneField& vp_b) {
  if (vp_a.width != vp_b.width || vp_a.height != vp_b.height ||
      vp_a.states != vp_b.states || vp_a.states < 1)
    fail(ErrorCode::invalid_parameter, "salience stacks mismatch");

  const size_t sz = vp_a.plane_size();
  PlaneField out_a(vp_a.width, vp_a.height, vp_a.states);
  PlaneField out_b(vp_a.width, vp_a.height, vp_a.states);
  std::vector<double> diff(sz);

  for (int m = 0; m < vp_a.states; ++m) {
    simd::subtract(vp_a.plane(m), vp_b.plane(m), diff.data(), sz);
    double tau = 0.0;
    for (size_t i = 0; i < sz; ++i) tau += std::abs(diff[i]);
    tau /= double(sz);

    double* oa = out_a.plane(m);
    double* ob = out_b.plane(m);
    if (tau == 0.0) {
      for (size_t i = 0; i < sz; ++i) oa[i] = 0.5;
    } else {
      const double inv = 0.5 / tau;
      for (size_t i = 0; i < sz; ++i) {
        const double d = diff[i];
        oa[i] = d >= tau ? 1.0 : (d <= -tau ? 0.0 : 0.5 + d * inv);
      }
    }
    for (size_t i = 0; i < sz; ++i) ob[i] = 1.0 - oa[i];
  }
  return {std::move(out_a), std::move(out_b)};
}

double detail_reliability(int m, int n) {
  if (n < 1 || m < 0 || m >= n)
    fail(ErrorCode::invalid_parameter, "state index out of range");
  const double u = double(m) - 0.5 * double(n - 1);
  return 1.0 / (1.0 + std::exp(-2.0 * u));
}

std::vector<double> multi_state_saliency(const PlaneField& vpm_planes) {
  if (vpm_planes.states < 1 || vpm_planes.width < 1 || vpm_planes.height < 1)
    fail(ErrorCode::invalid_parameter, "malformed vote stack");

  const int n = vpm_planes.states;
  std::vector<double> d(static_cast<size_t>(n));
  double dsum = 0.0;
  for (int m = 0; m < n; ++m) {
    d[size_t(m)] = detail_reliability(m, n);
    dsum += d[size_t(m)];
  }

  const size_t sz = vpm_planes.plane_size();
  std::vector<double> sm(sz, 0.0);
  for (int m = 0; m < n; ++m) {
    const double* plane = vpm_planes.plane(m);
    const double wm = d[size_t(m)] / dsum;
    for (size_t i = 0; i < sz; ++i) sm[i] += wm * plane[i];
  }
  return sm;
}

std::vector<double> activity_measure(const std::vector<double>& sm,
                                     const std::vector<double>& v,
                                     double alpha) {
  if (sm.size() != v.size())
    fail(ErrorCode::invalid_parameter, "activity inputs differ in size");
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0)
    fail(ErrorCode::invalid_parameter, "alpha must lie in [0, 1]");
  std::vector<double> mh(sm.size());
  for (size_t i = 0; i < sm.size(); ++i)
    mh[i] = alpha * sm[i] + (1.0 - alpha) * v[i];
  return mh;
}

Subband fuse_high(const Subband& a, const Subband& b,
                  const std::vector<double>& mh_a,
                  const std::vector<double>& mh_b) {
  check_band(a, "fuse_high");
  check_band(b, "fuse_high");
  check_same_shape(a, b);
  if (mh_a.size() != a.size() || mh_b.size() != a.size())
    fail(ErrorCode::invalid_parameter, "activity maps do not match subbands");

  Subband fused(a.width, a.height);
  simd::select_by_key(a.coeffs.data(), b.coeffs.data(), mh_a.data(),
                      mh_b.data(), fused.coeffs.data(), fused.size());
  return fused;
}

FusionResult fuse_images(const GrayImage& a, const GrayImage& b,
                         const FusionConfig& cfg) {
  const auto t_start = Clock::now();
  cfg.validate();
  check_pair(a, b);

  NsstDecomposition dec_a = decompose(a, cfg.decomposition);
  NsstDecomposition dec_b = decompose(b, cfg.decomposition);
  const auto t_decomposed = Clock::now();

  // One noise level per image, pooled over the finest detail subbands,
  // keeps every subband's variance ladder anchored to the same floor.
  const int finest = cfg.decomposition.levels - 1;
  auto pooled_noise = [&](const NsstDecomposition& dec) {
    double acc = 0.0;
    for (const Subband& s : dec.highs[size_t(finest)])
      acc += estimate_noise_variance(s);
    return acc / double(dec.highs[size_t(finest)].size());
  };
  const double noise_a = pooled_noise(dec_a);
  const double noise_b = pooled_noise(dec_b);

  MchmmConfig mc_a = cfg.mchmm;
  MchmmConfig mc_b = cfg.mchmm;
  if (!cfg.mchmm.noise_variance) {
    mc_a.noise_variance = noise_a;
    mc_b.noise_variance = noise_b;
  }

  struct Job {
    int scale;
    int dir;
  };
  std::vector<Job> jobs;
  for (int j = 0; j < cfg.decomposition.levels; ++j)
    for (int k = 0; k < cfg.decomposition.directions_per_scale[size_t(j)]; ++k)
      jobs.push_back({j, k});

  std::vector<std::vector<Subband>> fused_highs(size_t(cfg.decomposition.levels));
  for (int j = 0; j < cfg.decomposition.levels; ++j)
    fused_highs[size_t(j)].resize(
        size_t(cfg.decomposition.directions_per_scale[size_t(j)]));
  std::vector<SubbandDiagnostics> diags(jobs.size());
  std::atomic<bool> warned{false};

  auto run_job = [&](size_t idx) {
    const Job job = jobs[idx];
    const Subband& band_a = dec_a.highs[size_t(job.scale)][size_t(job.dir)];
    const Subband& band_b = dec_b.highs[size_t(job.scale)][size_t(job.dir)];

    ContextField ctx_a =
        compute_context_field(dec_a, job.scale, job.dir, cfg.context_weights);
    ContextField ctx_b =
        compute_context_field(dec_b, job.scale, job.dir, cfg.context_weights);

    TrainResult tr_a = train(band_a, ctx_a.v, mc_a, job.scale);
    TrainResult tr_b = train(band_b, ctx_b.v, mc_b, job.scale);
    if (tr_a.noise_floor_warning || tr_b.noise_floor_warning)
      warned.store(true, std::memory_order_relaxed);

    PlaneField vp_a = vp(tr_a.params, tr_a.posterior);
    PlaneField vp_b = vp(tr_b.params, tr_b.posterior);
    auto votes = vpm(vp_a, vp_b);

    std::vector<double> sm_a = multi_state_saliency(votes.first);
    std::vector<double> sm_b = multi_state_saliency(votes.second);
    std::vector<double> mh_a = activity_measure(sm_a, ctx_a.v, cfg.alpha);
    std::vector<double> mh_b = activity_measure(sm_b, ctx_b.v, cfg.alpha);

    fused_highs[size_t(job.scale)][size_t(job.dir)] =
        fuse_high(band_a, band_b, mh_a, mh_b);

    SubbandDiagnostics& d = diags[idx];
    d.scale = job.scale;
    d.dir = job.dir;
    d.global_iters_a = tr_a.global_iters;
    d.local_iters_a = tr_a.local_iters;
    d.global_iters_b = tr_b.global_iters;
    d.local_iters_b = tr_b.local_iters;
    d.threshold_a = ctx_a.t;
    d.threshold_b = ctx_b.t;
    d.v_a = std::move(ctx_a.v);
    d.v_b = std::move(ctx_b.v);
    d.sm_a = std::move(sm_a);
    d.sm_b = std::move(sm_b);
    d.mh_a = std::move(mh_a);
    d.mh_b = std::move(mh_b);
  };

  size_t workers = cfg.threads > 0
                       ? size_t(cfg.threads)
                       : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());

  if (workers <= 1) {
    for (size_t i = 0; i < jobs.size(); ++i) run_job(i);
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          run_job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  const auto t_modeled = Clock::now();

  NsstDecomposition fused_dec;
  fused_dec.spec = cfg.decomposition;
  fused_dec.width = a.width;
  fused_dec.height = a.height;
  fused_dec.low = fuse_low(dec_a.low, dec_b.low, cfg.low_window);
  fused_dec.highs = std::move(fused_highs);

  GrayImage out = reconstruct(fused_dec);
  for (double& v : out.data) v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
  const auto t_done = Clock::now();

  FusionResult result;
  result.fused = std::move(out);
  result.diagnostics.width = a.width;
  result.diagnostics.height = a.height;
  result.diagnostics.noise_variance_a = noise_a;
  result.diagnostics.noise_variance_b = noise_b;
  result.diagnostics.noise_floor_warning = warned.load();
  result.diagnostics.decompose_ms = ms_between(t_start, t_decomposed);
  result.diagnostics.model_ms = ms_between(t_decomposed, t_modeled);
  result.diagnostics.reconstruct_ms = ms_between(t_modeled, t_done);
  result.diagnostics.total_ms = ms_between(t_start, t_done);
  result.diagnostics.subbands = std::move(diags);
  return result;
}

void write_diagnostics(const FusionResult& result, const FusionConfig& cfg,
                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory " + dir.string());

  const int w = result.diagnostics.width;
  const int h = result.diagnostics.height;
  auto save_map = [&](const std::vector<double>& map, const std::string& name) {
    if (map.size() != size_t(w) * size_t(h)) return;
    GrayImage img(w, h);
    for (size_t i = 0; i < map.size(); ++i) img.data[i] = 255.0 * map[i];
    save_image(img, dir / (name + ".pgm"));
  };

  nlohmann::json summary;
  summary["width"] = w;
  summary["height"] = h;
  summary["noise_variance_a"] = result.diagnostics.noise_variance_a;
  summary["noise_variance_b"] = result.diagnostics.noise_variance_b;
  summary["noise_floor_warning"] = result.diagnostics.noise_floor_warning;
  summary["timings_ms"] = {
      {"decompose", result.diagnostics.decompose_ms},
      {"model", result.diagnostics.model_ms},
      {"reconstruct", result.diagnostics.reconstruct_ms},
      {"total", result.diagnostics.total_ms}};
  summary["config"] = {
      {"levels", cfg.decomposition.levels},
      {"directions_per_scale", cfg.decomposition.directions_per_scale},
      {"pyramid_filter", cfg.decomposition.pyramid_filter},
      {"context_weights",
       {{"direct", cfg.context_weights.direct},
        {"diagonal", cfg.context_weights.diagonal},
        {"parent", cfg.context_weights.parent},
        {"cousin", cfg.context_weights.cousin}}},
      {"num_states", cfg.mchmm.num_states},
      {"window_radius", cfg.mchmm.window_radius},
      {"max_global_iters", cfg.mchmm.max_global_iters},
      {"max_local_iters", cfg.mchmm.max_local_iters},
      {"convergence_tol", cfg.mchmm.convergence_tol},
      {"epsilon", cfg.mchmm.epsilon},
      {"alpha", cfg.alpha},
      {"low_window", cfg.low_window},
      {"threads", cfg.threads}};

  summary["subbands"] = nlohmann::json::array();
  for (const SubbandDiagnostics& d : result.diagnostics.subbands) {
    const std::string tag =
        "s" + std::to_string(d.scale) + "_d" + std::to_string(d.dir);
    save_map(d.v_a, "v_a_" + tag);
    save_map(d.v_b, "v_b_" + tag);
    save_map(d.sm_a, "sm_a_" + tag);
    save_map(d.sm_b, "sm_b_" + tag);
    save_map(d.mh_a, "mh_a_" + tag);
    save_map(d.mh_b, "mh_b_" + tag);
    summary["subbands"].push_back({{"scale", d.scale},
                                   {"direction", d.dir},
                                   {"global_iters_a", d.global_iters_a},
                                   {"local_iters_a", d.local_iters_a},
                                   {"global_iters_b", d.global_iters_b},
                                   {"local_iters_b", d.local_iters_b},
                                   {"threshold_a", d.threshold_a},
                                   {"threshold_b", d.threshold_b}});
  }

  std::ofstream out(dir / "run_summary.json");
  if (!out) fail(ErrorCode::io, "cannot create run_summary.json");
  out << summary.dump(2) << "\n";
}

}  // namespace nsf
