#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nsf/image.hpp"

namespace nsf {

// One transform subband, always the size of the analyzed image (the
// transform is fully redundant: no subsampling anywhere).
struct Subband {
  int width = 0;
  int height = 0;
  std::vector<double> coeffs;  // row-major

  Subband() = default;
  Subband(int w, int h) : width(w), height(h) {
    coeffs.assign(size_t(w) * size_t(h), 0.0);
  }

  double& at(int x, int y) { return coeffs[size_t(y) * width + x]; }
  double at(int x, int y) const { return coeffs[size_t(y) * width + x]; }
  size_t size() const { return coeffs.size(); }
};

// How to split an image: pyramid depth, per-scale direction counts
// (ordered coarsest scale first), and the pyramid filter family.
struct DecompositionSpec {
  int levels = 2;
  std::vector<int> directions_per_scale = {4, 8};  // coarse -> fine
  std::string pyramid_filter = "maxflat";

  // Structural checks; throws Error(invalid_spec).
  void validate() const;
};

// Multiscale, multidirection decomposition of one image.  highs[j][k] is
// the subband at scale j (0 = coarsest detail scale) and direction k.
struct NsstDecomposition {
  DecompositionSpec spec;
  int width = 0;
  int height = 0;
  Subband low;
  std::vector<std::vector<Subband>> highs;

  const Subband& band(int scale, int dir) const;
  Subband& band(int scale, int dir);

  // Shape/finiteness checks; throws Error(invalid_decomposition).
  void validate() const;
};

// Small centered square convolution kernel with odd side length.
struct Kernel2d {
  int size = 0;
  std::vector<double> taps;  // size * size, row-major

  double at(int x, int y) const { return taps[size_t(y) * size + x]; }
};

struct PyramidFilterBank {
  Kernel2d analysis_low;
  Kernel2d analysis_high;
  Kernel2d synthesis_low;
  Kernel2d synthesis_high;
};

// Builds the two-channel pyramid filter bank for the given family.
// "maxflat" is the only family implemented; anything else throws
// Error(unsupported_filter).  The returned pair satisfies
// H_low + H_high = identity, so each pyramid step reconstructs exactly.
PyramidFilterBank build_pyramid_filters(const std::string& name);

// Dilates a kernel by `factor`, inserting factor-1 zeros between taps
// (the a-trous scheme); factor 1 returns the kernel unchanged.
Kernel2d atrous_upsample(const Kernel2d& kernel, int factor);

// Circular 2-D convolution.  Small kernels run in the spatial domain;
// larger ones go through the frequency domain.  Both paths produce the
// same values to well below 1e-9.
std::vector<double> conv2d_circular(const double* src, int width, int height,
                                    const Kernel2d& kernel);

// Frequency-domain directional windows on a width x height grid.  The K
// windows are real, nonnegative, symmetric under frequency negation, and
// sum to one at every bin, so splitting a band and re-summing is exact.
class ShearFilterBank {
 public:
  // num_directions must be a power of two >= 2; the grid must be at least
  // 4x4.  Throws Error(invalid_parameter) / Error(too_small).
  static ShearFilterBank create(int num_directions, int width, int height);

  int directions() const { return int(windows_.size()); }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<double>& window(int k) const;

  // Splits a band into its directional components (direction k is the
  // inverse transform of the band spectrum scaled by window k).
  std::vector<Subband> split(const Subband& band) const;

 private:
  ShearFilterBank() = default;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::vector<double>> windows_;
};

// Convenience wrapper matching the bank factory.
ShearFilterBank build_shear_filters(int num_directions, int size);

// Full analysis: a-trous pyramid, finest scale split first, each detail
// band fanned out into directional subbands.  Throws Error(too_small) when
// the image cannot accommodate the deepest pyramid kernel.
NsstDecomposition decompose(const GrayImage& img, const DecompositionSpec& spec);

// Exact inverse of decompose (up to floating-point roundoff).
GrayImage reconstruct(const NsstDecomposition& dec);

// Writes every subband as raw little-endian float32 (row-major) plus a
// JSON sidecar {scale, direction, width, height}; the low band uses
// scale = -1, direction = -1.
void dump_decomposition(const NsstDecomposition& dec,
                        const std::filesystem::path& dir);

}  // namespace nsf
