#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "nsf/nsst.hpp"

namespace nsf {

// A stack of per-state planes over the subband grid.
struct PlaneField {
  int width = 0;
  int height = 0;
  int states = 0;
  std::vector<double> data;  // states planes of width*height, row-major

  PlaneField() = default;
  PlaneField(int w, int h, int n, double fill = 0.0)
      : width(w), height(h), states(n) {
    data.assign(size_t(n) * size_t(w) * size_t(h), fill);
  }

  size_t plane_size() const { return size_t(width) * size_t(height); }
  double* plane(int m) { return data.data() + size_t(m) * plane_size(); }
  const double* plane(int m) const {
    return data.data() + size_t(m) * plane_size();
  }
};

// State responsibilities: plane m holds P(S = m | coefficient) and the
// planes sum to one at every grid point.
using PosteriorField = PlaneField;

// Subband-wide mixture parameters shared by every coefficient.
struct GlobalParams {
  std::vector<double> prior;  // state probabilities, sum to 1
  std::vector<double> var;    // per-state variances, ascending by design
};

// Per-coefficient mixture parameters after localization: state prior,
// state variance, and the per-state context likelihood factor.
struct MchmmParams {
  PlaneField prior;
  PlaneField var;
  PlaneField ctx_lik;

  int width() const { return prior.width; }
  int height() const { return prior.height; }
  int states() const { return prior.states; }
};

struct MchmmConfig {
  int num_states = 4;
  std::vector<int> window_radius = {3, 3};  // per scale, coarse -> fine
  int max_global_iters = 20;
  int max_local_iters = 10;
  double convergence_tol = 1e-4;
  double epsilon = 1e-6;  // regularizer in the context kernel width
  // Noise variance shared across subbands of one image; when absent it is
  // estimated from the subband being trained.
  std::optional<double> noise_variance;

  void validate() const;
  // Radius for a scale index, clamping to the last configured entry.
  int radius_for_scale(int scale) const;
};

// Zero-mean Gaussian density; variance must be finite and positive.
double gaussian_density(double c, double variance);

// Robust noise-variance estimate from the median absolute coefficient
// (MAD / 0.6745 squared), floored at 1e-12.
double estimate_noise_variance(const Subband& s);

struct GlobalInit {
  GlobalParams params;
  double noise_variance = 0.0;
  // Set when the subband energy does not exceed the noise estimate, which
  // collapses the initial variance ladder onto the noise floor.
  bool noise_floor_warning = false;
};

// Uniform state priors and a variance ladder from the noise floor up to
// twice the subband energy.
GlobalInit init_global(const Subband& s, const MchmmConfig& cfg);

// Responsibilities under shared parameters.  When loglik is non-null it
// receives sum_i log(mixture density at c_i).
PosteriorField e_step_global(const Subband& s, const GlobalParams& gp,
                             double* loglik = nullptr);

// Reestimates shared priors and variances from responsibilities; a state
// with zero total responsibility keeps its previous variance.
GlobalParams m_step_global(const Subband& s, const PosteriorField& post,
                           const GlobalParams& prev);

// Turns shared parameters into per-coefficient ones by averaging
// responsibilities over a (2*radius+1)^2 circular window: windowed priors,
// responsibility-weighted local variances, and a context likelihood per
// state obtained by correlating responsibilities with a similarity kernel
// on the soft-context field v.  States with no local responsibility fall
// back to the shared variance and a unit context likelihood.
MchmmParams localize(const Subband& s, const PosteriorField& post_global,
                     const std::vector<double>& v_field,
                     const GlobalParams& gp, int radius, double epsilon);

// Responsibilities under per-coefficient parameters (the context
// likelihood enters as an extra per-state factor).
PosteriorField e_step_local(const Subband& s, const MchmmParams& params);

// Windowed reestimation of all three per-coefficient parameter planes;
// locally dead states keep their previous values.
MchmmParams m_step_local(const Subband& s, const PosteriorField& post,
                         const std::vector<double>& v_field,
                         const MchmmParams& prev, int radius, double epsilon);

struct TrainResult {
  MchmmParams params;
  PosteriorField posterior;  // consistent with params (one final E-step)
  int global_iters = 0;
  int local_iters = 0;
  bool noise_floor_warning = false;
  double noise_variance = 0.0;
  std::vector<double> global_loglik;  // one entry per global E-step
};

// Two-stage fit: shared-parameter EM to convergence, localization, then
// per-coefficient EM.  v_field must hold one soft-context value per
// coefficient; `scale` selects the window radius.
TrainResult train(const Subband& s, const std::vector<double>& v_field,
                  const MchmmConfig& cfg, int scale = 0);

// Writes the three parameter planes as raw float32 (all states of prior,
// then var, then ctx_lik) plus a JSON header describing the layout.
void dump_model(const MchmmParams& params, const std::filesystem::path& dir);

}  // namespace nsf
