#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "nsf/context.hpp"
#include "nsf/image.hpp"
#include "nsf/mchmm.hpp"
#include "nsf/nsst.hpp"

namespace nsf {

struct FusionConfig {
  DecompositionSpec decomposition;
  ContextWeights context_weights;
  MchmmConfig mchmm;
  double alpha = 0.5;  // saliency/context mix in the activity measure
  int low_window = 3;  // odd side length of the low-band energy window
  int threads = 0;     // 0 = hardware concurrency; subbands fuse in parallel

  void validate() const;
};

// Windowed mean energy of the low band: (1/W^2) * sum of squared
// coefficients over a W x W circular window.
std::vector<double> regional_energy(const Subband& low, int w_size);

// Min-max normalization to [0, 1]; a flat field maps to all 0.5.
std::vector<double> normalize_energy(const std::vector<double>& le);

// Low band blend: per-coefficient weight 0.5 + (ml_a - ml_b) / 2 applied to
// the first input, its complement to the second.
Subband fuse_low(const Subband& low_a, const Subband& low_b, int w_size);

// Per-state salience of each coefficient: state variance times state
// responsibility.
PlaneField vp(const MchmmParams& params, const PosteriorField& posterior);

// Soft per-state comparison of two salience stacks.  tau_m is the mean
// absolute salience difference of state m; differences beyond +-tau_m
// saturate at 1/0, in between the vote is linear, and tau_m = 0 gives a
// tie (0.5).  The two outputs are complementary (a + b = 1).
std::pair<PlaneField, PlaneField> vpm(const PlaneField& vp_a,
                                      const PlaneField& vp_b);

// Logistic confidence that state m (of n) carries signal rather than
// noise: 1 / (1 + exp(-2 * (m - (n-1)/2))).
double detail_reliability(int m, int n);

// Collapses per-state votes into one map, weighting states by their
// detail reliability.
std::vector<double> multi_state_saliency(const PlaneField& vpm_planes);

// Activity measure: alpha * saliency + (1 - alpha) * soft context.
std::vector<double> activity_measure(const std::vector<double>& sm,
                                     const std::vector<double>& v,
                                     double alpha);

// Choose-max selection on the activity measure; ties keep the first input.
Subband fuse_high(const Subband& a, const Subband& b,
                  const std::vector<double>& mh_a,
                  const std::vector<double>& mh_b);

struct SubbandDiagnostics {
  int scale = 0;
  int dir = 0;
  int global_iters_a = 0, local_iters_a = 0;
  int global_iters_b = 0, local_iters_b = 0;
  double threshold_a = 0.0, threshold_b = 0.0;
  std::vector<double> v_a, v_b;    // soft context
  std::vector<double> sm_a, sm_b;  // multi-state saliency
  std::vector<double> mh_a, mh_b;  // activity measure
};

struct FusionDiagnostics {
  int width = 0;
  int height = 0;
  double noise_variance_a = 0.0, noise_variance_b = 0.0;
  bool noise_floor_warning = false;
  double decompose_ms = 0.0, model_ms = 0.0, reconstruct_ms = 0.0,
         total_ms = 0.0;
  std::vector<SubbandDiagnostics> subbands;
};

struct FusionResult {
  GrayImage fused;
  FusionDiagnostics diagnostics;
};

// Full pipeline: decompose both images, fit one contextual mixture model
// per subband per image, blend the low band by regional energy and select
// high-band coefficients by activity, then reconstruct.  The output is
// clamped to [0, 255].
FusionResult fuse_images(const GrayImage& a, const GrayImage& b,
                         const FusionConfig& cfg);

// Writes the diagnostic maps (v/sm/mh per subband and input, scaled by 255
// into PGMs) and a JSON run summary (config echo, per-subband iteration
// counts, timings).
void write_diagnostics(const FusionResult& result, const FusionConfig& cfg,
                       const std::filesystem::path& dir);

}  // namespace nsf
