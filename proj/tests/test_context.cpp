#include <doctest.h>

#include <cmath>
#include <vector>

#include "nsf/context.hpp"
#include "nsf/error.hpp"
#include "nsf/nsst.hpp"

#include "support/synthetic.hpp"

using nsf::ContextWeights;
using nsf::DecompositionSpec;
using nsf::Error;
using nsf::ErrorCode;
using nsf::NsstDecomposition;
using nsf::Subband;

namespace {

// Decomposition-shaped container with directly authored coefficients.
NsstDecomposition make_decomposition(int w, int h) {
  NsstDecomposition dec;
  dec.spec = DecompositionSpec{};
  dec.width = w;
  dec.height = h;
  dec.low = Subband(w, h);
  dec.highs.assign(2, {});
  dec.highs[0].assign(4, Subband(w, h));
  dec.highs[1].assign(8, Subband(w, h));
  return dec;
}

}  // namespace

TEST_CASE("mean energy averages squared coefficients") {
  Subband s(2, 2);
  CHECK(nsf::subband_mean_energy(s) == 0.0);

  s.coeffs = {1, 2, 3, 4};
  CHECK(nsf::subband_mean_energy(s) == doctest::Approx(7.5));

  Subband c(3, 5);
  for (double& v : c.coeffs) v = -3.0;
  CHECK(nsf::subband_mean_energy(c) == doctest::Approx(9.0));
}

TEST_CASE("neighbor bookkeeping across scales and directions") {
  const DecompositionSpec spec;  // [4, 8]

  SUBCASE("fine-scale direction maps to the nearest coarse orientation") {
    const auto idx = nsf::neighbor_index(1, 5, spec);
    REQUIRE(idx.parent.has_value());
    CHECK(idx.parent->first == 0);
    CHECK(idx.parent->second == 2);  // floor(5 * 4 / 8)
    CHECK(idx.cousins[0] == std::pair{1, 4});
    CHECK(idx.cousins[1] == std::pair{1, 6});
  }

  SUBCASE("coarsest scale has no parent and wrapping cousins") {
    const auto idx = nsf::neighbor_index(0, 0, spec);
    CHECK(!idx.parent.has_value());
    CHECK(idx.cousins[0] == std::pair{0, 3});
    CHECK(idx.cousins[1] == std::pair{0, 1});
  }

  SUBCASE("two directions wrap both cousins onto the other band") {
    DecompositionSpec two;
    two.directions_per_scale = {2, 2};
    const auto idx = nsf::neighbor_index(0, 0, two);
    CHECK(idx.cousins[0] == std::pair{0, 1});
    CHECK(idx.cousins[1] == std::pair{0, 1});
  }

  SUBCASE("invalid coordinates are rejected") {
    CHECK_THROWS_AS(nsf::neighbor_index(2, 0, spec), Error);
    CHECK_THROWS_AS(nsf::neighbor_index(0, 4, spec), Error);
  }
}

TEST_CASE("context responds to an isolated impulse with ring weights") {
  auto dec = make_decomposition(8, 8);
  dec.highs[1][3].at(4, 4) = 1.0;  // unit impulse, everything else zero

  const ContextWeights w;  // 0.8 / 0.6 / 0.2 / 0.4
  const auto ctx = nsf::compute_context(dec, 1, 3, w);

  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const double got = ctx[size_t(y) * 8 + x];
      const int dx = std::abs(x - 4), dy = std::abs(y - 4);
      if (dx + dy == 1)
        CHECK(got == doctest::Approx(w.direct));
      else if (dx == 1 && dy == 1)
        CHECK(got == doctest::Approx(w.diagonal));
      else
        CHECK(got == 0.0);
    }
}

TEST_CASE("context scales quadratically with coefficient magnitude") {
  auto dec = make_decomposition(6, 6);
  int fill = 0;
  for (auto& scale : dec.highs)
    for (auto& band : scale)
      for (double& v : band.coeffs) v = 0.01 * double((fill++ % 13) - 6);

  const ContextWeights w;
  const auto base = nsf::compute_context(dec, 1, 2, w);

  for (auto& scale : dec.highs)
    for (auto& band : scale)
      for (double& v : band.coeffs) v *= 2.0;

  const auto doubled = nsf::compute_context(dec, 1, 2, w);
  for (size_t i = 0; i < base.size(); ++i)
    CHECK(doubled[i] == doctest::Approx(4.0 * base[i]).epsilon(1e-12));
}

TEST_CASE("cousin energy feeds the context of the middle band") {
  auto dec = make_decomposition(4, 4);
  // Only the cousins of (0, 1) carry signal, at one location.
  dec.highs[0][0].at(2, 2) = 3.0;
  dec.highs[0][2].at(2, 2) = 2.0;

  const ContextWeights w;
  const auto ctx = nsf::compute_context(dec, 0, 1, w);
  CHECK(ctx[2 * 4 + 2] == doctest::Approx(w.cousin * (9.0 + 4.0)));

  // Elsewhere the cousins are zero, so context is zero.
  CHECK(ctx[0] == 0.0);
}

TEST_CASE("parent energy reaches fine-scale context at the same pixel") {
  auto dec = make_decomposition(4, 4);
  dec.highs[0][2].at(1, 3) = 5.0;  // parent of fine direction 5

  const ContextWeights w;
  const auto ctx = nsf::compute_context(dec, 1, 5, w);
  CHECK(ctx[3 * 4 + 1] == doctest::Approx(w.parent * 25.0));
}

TEST_CASE("threshold follows the weighted mean-energy form") {
  const ContextWeights w;

  SUBCASE("all-zero subbands give a zero threshold") {
    const auto dec = make_decomposition(4, 4);
    CHECK(nsf::compute_threshold(dec, 1, 0, w) == 0.0);
  }

  SUBCASE("unit energies with a parent give the textbook 6.6") {
    auto dec = make_decomposition(4, 4);
    for (auto& scale : dec.highs)
      for (auto& band : scale)
        for (double& v : band.coeffs) v = 1.0;  // every E = 1
    CHECK(nsf::compute_threshold(dec, 1, 0, w) == doctest::Approx(6.6));
  }

  SUBCASE("constant-c subbands scale the threshold by c^2") {
    auto dec = make_decomposition(4, 4);
    for (auto& scale : dec.highs)
      for (auto& band : scale)
        for (double& v : band.coeffs) v = 3.0;
    const double expected =
        9.0 * (4 * w.direct + 4 * w.diagonal + w.parent + 2 * w.cousin);
    CHECK(nsf::compute_threshold(dec, 1, 0, w) == doctest::Approx(expected));
  }

  SUBCASE("coarsest scale drops the parent term") {
    auto dec = make_decomposition(4, 4);
    for (auto& scale : dec.highs)
      for (auto& band : scale)
        for (double& v : band.coeffs) v = 1.0;
    const double expected = 4 * w.direct + 4 * w.diagonal + 2 * w.cousin;
    CHECK(nsf::compute_threshold(dec, 0, 0, w) == doctest::Approx(expected));
  }
}

TEST_CASE("soft context follows the half-Gaussian ramp") {
  const double t = 2.0, sigma = 0.5;
  const std::vector<double> raw{t, t + sigma, t - sigma, 0.0, 1e9};
  const auto v = nsf::soft_context(raw, t, sigma);

  CHECK(v[0] == 0.5);
  CHECK(v[1] == doctest::Approx(1.0 - 0.5 * std::exp(-0.5)).epsilon(1e-9));
  CHECK(v[2] == doctest::Approx(0.5 * std::exp(-0.5)).epsilon(1e-9));
  // raw far below t with t >> sigma decays toward 0; far above saturates at 1.
  CHECK(v[3] == doctest::Approx(0.5 * std::exp(-0.5 * 16.0)).epsilon(1e-9));
  CHECK(v[4] == doctest::Approx(1.0));

  // Point symmetry about (t, 1/2).
  for (double d : {0.1, 0.7, 2.0}) {
    const auto pair = nsf::soft_context({t - d, t + d}, t, sigma);
    CHECK(pair[0] + pair[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("soft context degenerates to a step when sigma is zero") {
  const auto v = nsf::soft_context({1.0, 2.0, 3.0}, 2.0, 0.0);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.5);
  CHECK(v[2] == 1.0);
}

TEST_CASE("context field of a real decomposition is well-formed") {
  const auto img = testsupport::vis_like(64, 64, 33);
  const auto dec = nsf::decompose(img, DecompositionSpec{});
  const ContextWeights w;

  const auto field = nsf::compute_context_field(dec, 1, 4, w);
  CHECK(field.sigma > 0.0);
  CHECK(field.raw.size() == size_t(64) * 64);

  for (size_t i = 0; i < field.v.size(); ++i) {
    CHECK(field.v[i] >= 0.0);
    CHECK(field.v[i] <= 1.0);
  }

  // v is monotone in raw: spot-check sampled pairs.
  for (size_t i = 1; i < field.v.size(); i += 997) {
    const size_t j = (i * 7) % field.v.size();
    if (field.raw[i] < field.raw[j]) CHECK(field.v[i] <= field.v[j] + 1e-12);
  }
}

TEST_CASE("soft context lights up along a step edge") {
  // Single vertical step edge: mean v near the edge exceeds mean v far away.
  nsf::GrayImage img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) img.at(x, y) = x < 32 ? 40.0 : 210.0;

  const auto dec = nsf::decompose(img, DecompositionSpec{});
  const ContextWeights w;

  double near = 0.0, far = 0.0;
  size_t n_near = 0, n_far = 0;
  const auto field = nsf::compute_context_field(dec, 1, 0, w);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double v = field.v[size_t(y) * 64 + x];
      if (std::abs(x - 32) <= 2) {
        near += v;
        ++n_near;
      } else if (std::abs(x - 32) >= 8 && x > 4 && x < 60) {
        far += v;
        ++n_far;
      }
    }
  CHECK(near / double(n_near) > far / double(n_far));
}

TEST_CASE("weights must be finite and nonnegative") {
  ContextWeights w;
  w.direct = -0.1;
  CHECK_THROWS_AS(w.validate(), Error);
  w = ContextWeights{};
  w.parent = std::nan("");
  CHECK_THROWS_AS(w.validate(), Error);
}
