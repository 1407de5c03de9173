#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "nsf/nsst.hpp"

namespace nsf {

// Relative influence of each neighbourhood group when summarizing the
// energy around a coefficient.
struct ContextWeights {
  double direct = 0.8;    // 4-connected neighbours in the same subband
  double diagonal = 0.6;  // diagonal neighbours in the same subband
  double parent = 0.2;    // co-located coefficient one scale coarser
  double cousin = 0.4;    // co-located coefficients in adjacent directions

  // Throws Error(invalid_parameter) unless all weights are finite and >= 0.
  void validate() const;
};

// Cross-subband relatives of a subband: the parent subband one scale
// coarser (absent at the coarsest detail scale) and the two adjacent
// directions at the same scale.
struct NeighborIndex {
  std::optional<std::pair<int, int>> parent;         // {scale, direction}
  std::array<std::pair<int, int>, 2> cousins{};      // {scale, direction}
};

NeighborIndex neighbor_index(int scale, int dir, const DecompositionSpec& spec);

// Mean squared coefficient of a subband.
double subband_mean_energy(const Subband& s);

// Weighted sum of squared neighbours for every coefficient: the 4-connected
// and diagonal rings (circular wrap), the parent coefficient when one
// exists, and both cousins.
std::vector<double> compute_context(const NsstDecomposition& dec, int scale,
                                    int dir, const ContextWeights& w);

// Expected value of the raw context under a flat-energy assumption: each
// squared neighbour is replaced by the mean energy of the subband it lives
// in.  Serves as the midpoint of the soft threshold below.
double compute_threshold(const NsstDecomposition& dec, int scale, int dir,
                         const ContextWeights& w);

// Squashes raw context through a logistic centred at t with slope set by
// sigma: v = 1 / (1 + exp(-(raw - t) / sigma)).  sigma = 0 degenerates to a
// step (0 below t, 1 above, 0.5 at t).
std::vector<double> soft_context(const std::vector<double>& raw, double t,
                                 double sigma);

// Raw and squashed context for one subband, with the threshold and the
// population standard deviation that parameterized the squash.
struct ContextField {
  int width = 0;
  int height = 0;
  std::vector<double> raw;
  std::vector<double> v;
  double t = 0.0;
  double sigma = 0.0;
};

ContextField compute_context_field(const NsstDecomposition& dec, int scale,
                                   int dir, const ContextWeights& w);

}  // namespace nsf
