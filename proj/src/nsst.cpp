#include "nsf/nsst.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "nsf/error.hpp"
#include "nsf/fft.hpp"
#include "nsf/gridops.hpp"
#include "nsf/kernels.hpp"

namespace nsf {

namespace {

bool is_pow2(int v) { return v >= 1 && (v & (v - 1)) == 0; }

// Kernels up to this side length convolve in the spatial domain; larger
// ones multiply spectra.  Both paths agree to well below 1e-9.
constexpr int kSpatialKernelLimit = 9;

// Meyer auxiliary polynomial: 0 for x <= 0, 1 for x >= 1, and
// nu(x) + nu(1 - x) = 1 in between, with two vanishing derivatives at
// both ends.
double meyer_nu(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * x * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)));
}

// Smooth bump on [-1, 1] whose integer translates sum to one.
double wedge_bump(double u) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  return u <= 0.0 ? meyer_nu(1.0 + u) : meyer_nu(1.0 - u);
}

// Maps a nonzero frequency direction onto the pseudo-polar angle in
// [-1, 3): the right cone by slope fy/fx, the top cone by reciprocal
// slope, and the two opposite cones folded on top (period 4), so that
// negated frequencies share an angle and the windows stay symmetric.
double pseudo_angle(double fx, double fy) {
  double p;
  if (std::abs(fx) >= std::abs(fy))
    p = fx > 0.0 ? fy / fx : 4.0 + fy / fx;
  else
    p = fy > 0.0 ? 2.0 - fx / fy : 6.0 - fx / fy;
  return p >= 3.0 ? p - 4.0 : p;
}

void write_raw_float32(const std::filesystem::path& path,
                       const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot create " + path.string());
  std::vector<float> f(values.begin(), values.end());
  out.write(reinterpret_cast<const char*>(f.data()),
            std::streamsize(f.size() * sizeof(float)));
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

void write_sidecar(const std::filesystem::path& path, int scale, int dir,
                   int width, int height) {
  nlohmann::json j{
      {"scale", scale}, {"direction", dir}, {"width", width}, {"height", height}};
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot create " + path.string());
  out << j.dump(2) << "\n";
}

void check_band_shape(const Subband& s, int width, int height,
                      const char* what) {
  if (s.width != width || s.height != height ||
      s.coeffs.size() != size_t(width) * size_t(height))
    fail(ErrorCode::invalid_decomposition,
         std::string(what) + ": subband shape mismatch");
  for (double v : s.coeffs)
    if (!std::isfinite(v))
      fail(ErrorCode::invalid_decomposition,
           std::string(what) + ": non-finite coefficient");
}

}  // namespace

void DecompositionSpec::validate() const {
  if (levels < 1)
    fail(ErrorCode::invalid_spec, "decomposition needs at least one level");
  if (int(directions_per_scale.size()) != levels)
    fail(ErrorCode::invalid_spec,
         "directions_per_scale must list one count per level");
  for (int k : directions_per_scale)
    if (k < 2 || !is_pow2(k))
      fail(ErrorCode::invalid_spec,
           "direction counts must be powers of two >= 2");
  if (pyramid_filter.empty())
    fail(ErrorCode::invalid_spec, "pyramid filter name is empty");
}

const Subband& NsstDecomposition::band(int scale, int dir) const {
  if (scale < 0 || scale >= int(highs.size()))
    fail(ErrorCode::out_of_range, "scale index " + std::to_string(scale));
  if (dir < 0 || dir >= int(highs[scale].size()))
    fail(ErrorCode::out_of_range, "direction index " + std::to_string(dir));
  return highs[scale][dir];
}

Subband& NsstDecomposition::band(int scale, int dir) {
  return const_cast<Subband&>(
      static_cast<const NsstDecomposition&>(*this).band(scale, dir));
}

void NsstDecomposition::validate() const {
  spec.validate();
  if (width <= 0 || height <= 0)
    fail(ErrorCode::invalid_decomposition, "non-positive dimensions");
  check_band_shape(low, width, height, "low band");
  if (int(highs.size()) != spec.levels)
    fail(ErrorCode::invalid_decomposition, "scale count disagrees with spec");
  for (int j = 0; j < spec.levels; ++j) {
    if (int(highs[j].size()) != spec.directions_per_scale[j])
      fail(ErrorCode::invalid_decomposition,
           "direction count disagrees with spec at scale " + std::to_string(j));
    for (const Subband& s : highs[j]) check_band_shape(s, width, height, "high band");
  }
}

PyramidFilterBank build_pyramid_filters(const std::string& name) {
  if (name != "maxflat")
    fail(ErrorCode::unsupported_filter, "unknown pyramid filter: " + name);

  // 7-tap maxflat halfband lowpass; the separable 2-D version keeps DC gain
  // exactly 1 and its quincunx-free complement (delta - low) makes the pair
  // an identity: analysis low + high responses sum to an all-pass.
  static const double h[7] = {-1.0 / 32, 0.0,        9.0 / 32, 16.0 / 32,
                              9.0 / 32,  0.0,        -1.0 / 32};
  PyramidFilterBank bank;
  bank.analysis_low.size = 7;
  bank.analysis_low.taps.resize(49);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) bank.analysis_low.taps[y * 7 + x] = h[y] * h[x];

  bank.analysis_high.size = 7;
  bank.analysis_high.taps.resize(49);
  for (int i = 0; i < 49; ++i)
    bank.analysis_high.taps[i] = -bank.analysis_low.taps[i];
  bank.analysis_high.taps[3 * 7 + 3] += 1.0;

  // With the detail formed as image minus lowpass, synthesis just sums the
  // two channels back.
  bank.synthesis_low.size = 1;
  bank.synthesis_low.taps = {1.0};
  bank.synthesis_high.size = 1;
  bank.synthesis_high.taps = {1.0};
  return bank;
}

Kernel2d atrous_upsample(const Kernel2d& kernel, int factor) {
  if (factor < 1)
    fail(ErrorCode::invalid_parameter, "upsample factor must be >= 1");
  if (kernel.size < 1 || kernel.size % 2 == 0 ||
      kernel.taps.size() != size_t(kernel.size) * size_t(kernel.size))
    fail(ErrorCode::invalid_parameter, "malformed kernel");
  if (factor == 1) return kernel;

  Kernel2d up;
  up.size = (kernel.size - 1) * factor + 1;
  up.taps.assign(size_t(up.size) * size_t(up.size), 0.0);
  for (int y = 0; y < kernel.size; ++y)
    for (int x = 0; x < kernel.size; ++x)
      up.taps[size_t(y) * factor * up.size + size_t(x) * factor] =
          kernel.at(x, y);
  return up;
}

std::vector<double> conv2d_circular(const double* src, int width, int height,
                                    const Kernel2d& kernel) {
  if (width <= 0 || height <= 0)
    fail(ErrorCode::invalid_parameter, "convolution over an empty grid");
  if (kernel.size < 1 || kernel.size % 2 == 0 ||
      kernel.taps.size() != size_t(kernel.size) * size_t(kernel.size))
    fail(ErrorCode::invalid_parameter, "malformed kernel");

  const size_t n = size_t(width) * size_t(height);
  const int c = (kernel.size - 1) / 2;

  if (kernel.size <= kSpatialKernelLimit) {
    std::vector<double> out(n, 0.0);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int j = 0; j < kernel.size; ++j) {
          const double* row = src + size_t(wrap(y - (j - c), height)) * width;
          const double* krow = kernel.taps.data() + size_t(j) * kernel.size;
          for (int i = 0; i < kernel.size; ++i)
            acc += krow[i] * row[wrap(x - (i - c), width)];
        }
        out[size_t(y) * width + x] = acc;
      }
    }
    return out;
  }

  // Frequency path: the kernel is laid out circularly (taps beyond the grid
  // wrap and accumulate), then both spectra are multiplied.
  std::vector<double> padded(n, 0.0);
  for (int j = 0; j < kernel.size; ++j)
    for (int i = 0; i < kernel.size; ++i)
      padded[size_t(wrap(j - c, height)) * width + wrap(i - c, width)] +=
          kernel.at(i, j);

  auto spec = fft::forward(src, width, height);
  auto kspec = fft::forward(padded.data(), width, height);
  for (size_t i = 0; i < n; ++i) spec[i] *= kspec[i];
  return fft::inverse(spec.data(), width, height);
}

ShearFilterBank ShearFilterBank::create(int num_directions, int width,
                                        int height) {
  if (num_directions < 2 || !is_pow2(num_directions))
    fail(ErrorCode::invalid_parameter,
         "direction count must be a power of two >= 2");
  if (width < 4 || height < 4)
    fail(ErrorCode::too_small, "grid too small for directional filtering");

  ShearFilterBank bank;
  bank.width_ = width;
  bank.height_ = height;
  bank.windows_.assign(size_t(num_directions),
                       std::vector<double>(size_t(width) * size_t(height), 0.0));

  const double delta = 4.0 / num_directions;  // wedge spacing in pseudo-angle
  for (int y = 0; y < height; ++y) {
    const double fy = y <= height / 2 ? double(y) : double(y - height);
    for (int x = 0; x < width; ++x) {
      const double fx = x <= width / 2 ? double(x) : double(x - width);
      const size_t idx = size_t(y) * width + x;
      if (fx == 0.0 && fy == 0.0) {
        bank.windows_[0][idx] = 1.0;  // DC has no direction; keep partition
        continue;
      }
      const double q = pseudo_angle(fx, fy);
      for (int k = 0; k < num_directions; ++k) {
        const double center = -1.0 + delta * k;
        const double d = std::remainder(q - center, 4.0);
        bank.windows_[k][idx] = wedge_bump(d / delta);
      }
    }
  }
  return bank;
}

const std::vector<double>& ShearFilterBank::window(int k) const {
  if (k < 0 || k >= directions())
    fail(ErrorCode::out_of_range, "direction index " + std::to_string(k));
  return windows_[k];
}

std::vector<Subband> ShearFilterBank::split(const Subband& band) const {
  if (band.width != width_ || band.height != height_)
    fail(ErrorCode::invalid_parameter, "band size does not match filter bank");
  const size_t n = band.size();
  auto spec = fft::forward(band.coeffs.data(), width_, height_);

  std::vector<Subband> parts;
  parts.reserve(windows_.size());
  std::vector<std::complex<double>> scaled(n);
  for (const std::vector<double>& win : windows_) {
    scaled = spec;
    simd::scale_complex(reinterpret_cast<double*>(scaled.data()), win.data(), n);
    Subband s(width_, height_);
    s.coeffs = fft::inverse(scaled.data(), width_, height_);
    parts.push_back(std::move(s));
  }
  return parts;
}

ShearFilterBank build_shear_filters(int num_directions, int size) {
  return ShearFilterBank::create(num_directions, size, size);
}

NsstDecomposition decompose(const GrayImage& img,
                            const DecompositionSpec& spec) {
  img.validate();
  spec.validate();
  PyramidFilterBank bank = build_pyramid_filters(spec.pyramid_filter);

  const int deepest =
      (bank.analysis_low.size - 1) * (1 << (spec.levels - 1)) + 1;
  if (img.width < deepest || img.height < deepest)
    fail(ErrorCode::too_small,
         "image smaller than the deepest pyramid kernel (" +
             std::to_string(deepest) + " px)");

  NsstDecomposition dec;
  dec.spec = spec;
  dec.width = img.width;
  dec.height = img.height;
  dec.highs.resize(size_t(spec.levels));

  const size_t n = img.size();
  std::vector<double> approx = img.data;
  for (int step = 0; step < spec.levels; ++step) {
    const int scale = spec.levels - 1 - step;  // storage is coarse -> fine
    Kernel2d kernel = atrous_upsample(bank.analysis_low, 1 << step);
    std::vector<double> low =
        conv2d_circular(approx.data(), img.width, img.height, kernel);

    Subband detail(img.width, img.height);
    simd::subtract(approx.data(), low.data(), detail.coeffs.data(), n);

    ShearFilterBank shear = ShearFilterBank::create(
        spec.directions_per_scale[size_t(scale)], img.width, img.height);
    dec.highs[size_t(scale)] = shear.split(detail);
    approx = std::move(low);
  }

  dec.low.width = img.width;
  dec.low.height = img.height;
  dec.low.coeffs = std::move(approx);
  return dec;
}

GrayImage reconstruct(const NsstDecomposition& dec) {
  dec.validate();
  GrayImage out(dec.width, dec.height);
  out.data = dec.low.coeffs;
  for (const auto& scale : dec.highs)
    for (const Subband& s : scale)
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += s.coeffs[i];
  return out;
}

void dump_decomposition(const NsstDecomposition& dec,
                        const std::filesystem::path& dir) {
  dec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory " + dir.string());

  write_raw_float32(dir / "low.raw", dec.low.coeffs);
  write_sidecar(dir / "low.json", -1, -1, dec.width, dec.height);
  for (int j = 0; j < int(dec.highs.size()); ++j) {
    for (int k = 0; k < int(dec.highs[j].size()); ++k) {
      std::string stem = "s" + std::to_string(j) + "_d" + std::to_string(k);
      write_raw_float32(dir / (stem + ".raw"), dec.highs[j][k].coeffs);
      write_sidecar(dir / (stem + ".json"), j, k, dec.width, dec.height);
    }
  }
}

}  // namespace nsf
