#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nsf/gridops.hpp"

using nsf::box_sum_circular;
using nsf::wrap;

namespace {

// Direct O(N * window^2) reference with circular indexing.
std::vector<double> box_sum_reference(const std::vector<double>& src, int w,
                                      int h, int radius) {
  std::vector<double> out(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          acc += src[size_t(wrap(y + dy, h)) * w + wrap(x + dx, w)];
      out[size_t(y) * w + x] = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("wrap folds any offset into [0, n)") {
  CHECK(wrap(0, 5) == 0);
  CHECK(wrap(4, 5) == 4);
  CHECK(wrap(5, 5) == 0);
  CHECK(wrap(-1, 5) == 4);
  CHECK(wrap(-11, 5) == 4);
  CHECK(wrap(13, 5) == 3);
}

TEST_CASE("box_sum_circular matches the brute-force window sum") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);

  for (auto [w, h, radius] :
       {std::tuple{7, 5, 1}, {8, 8, 2}, {5, 9, 3}, {4, 4, 5}, {1, 6, 2}}) {
    CAPTURE(w);
    CAPTURE(h);
    CAPTURE(radius);
    std::vector<double> src(size_t(w) * size_t(h));
    for (double& v : src) v = dist(rng);

    const auto fast = box_sum_circular(src.data(), w, h, radius);
    const auto ref = box_sum_reference(src, w, h, radius);
    for (size_t i = 0; i < src.size(); ++i)
      CHECK(fast[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("box sum of a constant field is constant") {
  const int w = 6, h = 4, radius = 2;
  std::vector<double> src(size_t(w) * h, 2.5);
  const auto sums = box_sum_circular(src.data(), w, h, radius);
  const double expected = 2.5 * (2 * radius + 1) * (2 * radius + 1);
  for (double v : sums) CHECK(v == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("population statistics") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto s = nsf::population_stats(v.data(), v.size());
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.var == doctest::Approx(1.25));

  const std::vector<double> flat{3.0, 3.0, 3.0};
  const auto f = nsf::population_stats(flat.data(), flat.size());
  CHECK(f.var == 0.0);
}

TEST_CASE("circular_shift moves samples with wraparound") {
  // 3x2 field, shift by (1, 1): every sample lands at (x+1 mod 3, y+1 mod 2).
  const std::vector<double> src{1, 2, 3, 4, 5, 6};
  const auto out = nsf::circular_shift(src, 3, 2, 1, 1);
  CHECK(out == std::vector<double>{6, 4, 5, 3, 1, 2});

  // Shifting by the full period is the identity.
  const auto full = nsf::circular_shift(src, 3, 2, 3, 2);
  CHECK(full == src);
}
