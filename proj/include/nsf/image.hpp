#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace nsf {

// Grayscale raster with double-precision samples in row-major order.
// The pipeline works on the native 8-bit range [0, 255]; intermediate
// results (transform coefficients, unclamped blends) may leave that range,
// so bounds are enforced when quantizing for disk rather than on
// construction.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // height * width samples, row-major

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0);

  double& at(int x, int y) { return data[size_t(y) * width + x]; }
  double at(int x, int y) const { return data[size_t(y) * width + x]; }
  size_t size() const { return data.size(); }

  // Throws Error(invalid_image) on non-positive dimensions, a sample count
  // that disagrees with width*height, or non-finite samples.
  void validate() const;
};

// Reads an 8-bit grayscale image, sniffing binary PGM or PNG from the file
// content.  Samples come back as doubles in [0, 255].
GrayImage load_image(const std::filesystem::path& path);

// Writes binary PGM (maxval 255) or 8-bit grayscale PNG depending on the
// file extension (.pgm / .png).  Samples are clamped to [0, 255] and
// rounded half away from zero.
void save_image(const GrayImage& img, const std::filesystem::path& path);

// Quantizes one sample the way save_image does.
uint8_t quantize_sample(double v);

// Validates both images and confirms equal dimensions; throws
// Error(incompatible_pair) on a size mismatch.
void check_pair(const GrayImage& a, const GrayImage& b);

}  // namespace nsf
