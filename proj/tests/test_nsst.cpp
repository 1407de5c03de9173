#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "nsf/error.hpp"
#include "nsf/fft.hpp"
#include "nsf/gridops.hpp"
#include "nsf/nsst.hpp"

#include "support/synthetic.hpp"

using nsf::DecompositionSpec;
using nsf::Error;
using nsf::ErrorCode;
using nsf::GrayImage;
using nsf::Kernel2d;
using nsf::NsstDecomposition;
using nsf::Subband;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("maxflat analysis pair sums to an all-pass response") {
  const auto bank = nsf::build_pyramid_filters("maxflat");

  // Sum the two frequency responses on a 64x64 DFT grid: embedding
  // low + high into one image and transforming measures |H0 + H1|.
  const int n = 64;
  std::vector<double> impulse_sum(size_t(n) * n, 0.0);
  auto add_kernel = [&](const Kernel2d& k) {
    const int c = k.size / 2;
    for (int y = 0; y < k.size; ++y)
      for (int x = 0; x < k.size; ++x) {
        const int ix = nsf::wrap(x - c, n), iy = nsf::wrap(y - c, n);
        impulse_sum[size_t(iy) * n + ix] += k.at(x, y);
      }
  };
  add_kernel(bank.analysis_low);
  add_kernel(bank.analysis_high);

  const auto spectrum = nsf::fft::forward(impulse_sum.data(), n, n);
  for (const auto& bin : spectrum) {
    CHECK(std::abs(bin.real() - 1.0) < 1e-10);
    CHECK(std::abs(bin.imag()) < 1e-10);
  }
}

TEST_CASE("unknown pyramid family is rejected") {
  try {
    nsf::build_pyramid_filters("foo");
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unsupported_filter);
  }
}

TEST_CASE("a-trous upsampling interleaves zeros") {
  Kernel2d k;
  k.size = 3;
  k.taps = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const Kernel2d up = nsf::atrous_upsample(k, 2);
  CHECK(up.size == 5);
  CHECK(up.at(0, 0) == 1);
  CHECK(up.at(2, 0) == 2);
  CHECK(up.at(4, 4) == 9);
  CHECK(up.at(1, 0) == 0);
  CHECK(up.at(1, 1) == 0);
  double total = 0.0, orig = 0.0;
  for (double t : up.taps) total += t;
  for (double t : k.taps) orig += t;
  CHECK(total == orig);

  const Kernel2d same = nsf::atrous_upsample(k, 1);
  CHECK(same.taps == k.taps);
}

TEST_CASE("spatial and frequency convolution paths agree") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);

  const int w = 37, h = 29;
  std::vector<double> src(size_t(w) * h);
  for (double& v : src) v = dist(rng);

  // 13x13 kernel: over the spatial-path limit, so conv2d_circular takes the
  // FFT route; compare against a direct spatial evaluation.
  Kernel2d k;
  k.size = 13;
  k.taps.resize(size_t(k.size) * k.size);
  for (double& t : k.taps) t = dist(rng);

  const auto fast = nsf::conv2d_circular(src.data(), w, h, k);

  const int c = k.size / 2;
  std::vector<double> ref(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < k.size; ++ky)
        for (int kx = 0; kx < k.size; ++kx)
          acc += k.at(kx, ky) * src[size_t(nsf::wrap(y + ky - c, h)) * w +
                                    nsf::wrap(x + kx - c, w)];
      ref[size_t(y) * w + x] = acc;
    }

  CHECK(max_abs_diff(fast, ref) < 1e-9);
}

TEST_CASE("shear windows form a partition of unity") {
  for (int k : {2, 4, 8}) {
    CAPTURE(k);
    const auto bank = nsf::ShearFilterBank::create(k, 32, 24);
    for (size_t i = 0; i < size_t(32) * 24; ++i) {
      double total = 0.0;
      for (int d = 0; d < k; ++d) total += bank.window(d)[i];
      CHECK(std::abs(total - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("directional split re-sums to the original band") {
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);

  for (int trial = 0; trial < 10; ++trial) {
    Subband band(64, 64);
    for (double& v : band.coeffs) v = dist(rng);

    const auto bank = nsf::ShearFilterBank::create(4, 64, 64);
    const auto parts = bank.split(band);
    REQUIRE(parts.size() == 4);

    std::vector<double> total(band.size(), 0.0);
    for (const auto& p : parts)
      for (size_t i = 0; i < total.size(); ++i) total[i] += p.coeffs[i];
    CHECK(max_abs_diff(total, band.coeffs) < 1e-6);
  }
}

TEST_CASE("horizontal edge energy lands in the aligned wedge") {
  // A horizontal edge varies vertically: its spectrum concentrates on the
  // fy axis, which for 4 directions is the last wedge.
  Subband band(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      band.at(x, y) = y < 32 ? -1.0 : 1.0;

  const auto bank = nsf::ShearFilterBank::create(4, 64, 64);
  const auto parts = bank.split(band);

  std::vector<double> energy(parts.size(), 0.0);
  double total = 0.0;
  for (size_t d = 0; d < parts.size(); ++d) {
    for (double v : parts[d].coeffs) energy[d] += v * v;
    total += energy[d];
  }
  CHECK(energy[3] / total >= 0.8);
}

TEST_CASE("direction count must be a power of two of at least 2") {
  for (int bad : {0, 1, 3, 6, -4}) {
    CAPTURE(bad);
    try {
      nsf::ShearFilterBank::create(bad, 32, 32);
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_spec);
    }
  }
}

TEST_CASE("constant images decompose into a constant low band") {
  GrayImage img(48, 40);
  for (double& v : img.data) v = 77.0;

  const DecompositionSpec spec;
  const NsstDecomposition dec = nsf::decompose(img, spec);

  for (double v : dec.low.coeffs) CHECK(std::abs(v - 77.0) < 1e-6);
  for (const auto& scale : dec.highs)
    for (const auto& band : scale)
      for (double v : band.coeffs) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("decomposition round trip is exact to floating-point noise") {
  const DecompositionSpec spec;
  for (uint32_t seed : {1u, 2u, 3u}) {
    const GrayImage img = testsupport::random_image(96, 80, seed);
    const NsstDecomposition dec = nsf::decompose(img, spec);

    CHECK(dec.highs.size() == 2);
    CHECK(dec.highs[0].size() == 4);
    CHECK(dec.highs[1].size() == 8);
    for (const auto& scale : dec.highs)
      for (const auto& band : scale) {
        CHECK(band.width == img.width);
        CHECK(band.height == img.height);
      }

    const GrayImage back = nsf::reconstruct(dec);
    CHECK(max_abs_diff(back.data, img.data) < 1e-6);
  }
}

TEST_CASE("decomposition commutes with circular shifts") {
  const DecompositionSpec spec;
  const GrayImage img = testsupport::vis_like(64, 64, 5);

  GrayImage shifted(64, 64);
  shifted.data = nsf::circular_shift(img.data, 64, 64, 5, 9);

  const NsstDecomposition d0 = nsf::decompose(img, spec);
  const NsstDecomposition d1 = nsf::decompose(shifted, spec);

  const auto expect_shifted = [&](const std::vector<double>& base,
                                  const std::vector<double>& moved) {
    const auto expected = nsf::circular_shift(base, 64, 64, 5, 9);
    CHECK(max_abs_diff(expected, moved) < 1e-6);
  };
  expect_shifted(d0.low.coeffs, d1.low.coeffs);
  for (size_t j = 0; j < d0.highs.size(); ++j)
    for (size_t k = 0; k < d0.highs[j].size(); ++k)
      expect_shifted(d0.highs[j][k].coeffs, d1.highs[j][k].coeffs);
}

TEST_CASE("images below the deepest kernel support are rejected") {
  const DecompositionSpec spec;  // needs 6 * 2^(levels-1) + 1 = 13 pixels
  const GrayImage tiny(12, 40);
  try {
    nsf::decompose(tiny, spec);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::too_small);
  }
  CHECK_NOTHROW(nsf::decompose(GrayImage(13, 13), spec));
}

TEST_CASE("band accessor validates indices") {
  const NsstDecomposition dec = nsf::decompose(GrayImage(32, 32), DecompositionSpec{});
  CHECK_NOTHROW(dec.band(1, 7));
  CHECK_THROWS_AS(dec.band(1, 8), Error);
  CHECK_THROWS_AS(dec.band(2, 0), Error);
  CHECK_THROWS_AS(dec.band(-1, 0), Error);
}

TEST_CASE("spec validation rejects malformed requests") {
  DecompositionSpec spec;
  spec.levels = 0;
  CHECK_THROWS_AS(spec.validate(), Error);

  spec = DecompositionSpec{};
  spec.directions_per_scale = {4};  // one count per level required
  CHECK_THROWS_AS(spec.validate(), Error);

  spec = DecompositionSpec{};
  spec.directions_per_scale = {4, 3};
  CHECK_THROWS_AS(spec.validate(), Error);
}
