#pragma once

#include <string>

#include "nsf/image.hpp"

namespace nsf::metrics {

// Mean gradient magnitude over forward differences:
// sqrt((dx^2 + dy^2) / 2) averaged over the (M-1) x (N-1) interior.
double avg_gradient(const GrayImage& img);

// Mean Sobel gradient magnitude with replicated borders.
double edge_intensity(const GrayImage& img);

// Root of the summed row/column frequencies, each an RMS over the valid
// horizontal (vertical) differences.
double spatial_frequency(const GrayImage& img);

// Sum of the correlations between each source and the fused image minus
// the other source; a zero-variance argument contributes 0.
double scd(const GrayImage& a, const GrayImage& b, const GrayImage& f);

// Multi-scale structural similarity between two images (up to five
// dyadic scales, 11x11 Gaussian windows; scales that no longer fit are
// dropped and the scale weights renormalized).
double ms_ssim_pair(const GrayImage& x, const GrayImage& y);

// Mean of ms_ssim_pair(a, f) and ms_ssim_pair(b, f).
double ms_ssim(const GrayImage& a, const GrayImage& b, const GrayImage& f);

// Gradient-preservation score: per-pixel edge strength/orientation
// agreement between each source and the fused image, squashed so perfect
// agreement scores exactly 1, weighted by source edge strength.
double qabf(const GrayImage& a, const GrayImage& b, const GrayImage& f);

struct PiellaResult {
  double q = 0.0;   // mean windowed fusion quality
  double qw = 0.0;  // salience-weighted
  double qe = 0.0;  // edge-sensitive (qw times qw of the edge images)
};

// Universal-quality-index based fusion quality over 8x8 sliding windows.
PiellaResult piella(const GrayImage& a, const GrayImage& b,
                    const GrayImage& f);

struct MetricsReport {
  double qabf = 0.0;
  double scd = 0.0;
  double ms_ssim = 0.0;
  double ag = 0.0;
  double ei = 0.0;
  double q = 0.0;
  double qw = 0.0;
  double qe = 0.0;
  double sf = 0.0;
};

// All nine indices for a fused pair (ag/ei/sf are of the fused image).
MetricsReport report(const GrayImage& a, const GrayImage& b,
                     const GrayImage& f);

// Fixed key order and six decimal places:
// {"qabf","scd","ms_ssim","ag","ei","q","qw","qe","sf"}.
std::string to_json(const MetricsReport& r);

}  // namespace nsf::metrics
