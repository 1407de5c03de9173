#include "nsf/gridops.hpp"

#include "nsf/error.hpp"

namespace nsf {

std::vector<double> box_sum_circular(const double* src, int width, int height,
                                     int radius) {
  if (width <= 0 || height <= 0)
    fail(ErrorCode::invalid_parameter, "box_sum_circular: empty grid");
  if (radius < 0)
    fail(ErrorCode::invalid_parameter, "box_sum_circular: negative radius");

  const size_t n = size_t(width) * size_t(height);
  std::vector<double> rows(n), out(n);

  // Horizontal pass: running sum along each row.
  for (int y = 0; y < height; ++y) {
    const double* s = src + size_t(y) * width;
    double* d = rows.data() + size_t(y) * width;
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k) acc += s[wrap(k, width)];
    for (int x = 0; x < width; ++x) {
      d[x] = acc;
      acc += s[wrap(x + radius + 1, width)] - s[wrap(x - radius, width)];
    }
  }

  // Vertical pass: running sum down each column, whole rows at a time.
  std::vector<double> acc(size_t(width), 0.0);
  for (int k = -radius; k <= radius; ++k) {
    const double* r = rows.data() + size_t(wrap(k, height)) * width;
    for (int x = 0; x < width; ++x) acc[x] += r[x];
  }
  for (int y = 0; y < height; ++y) {
    double* d = out.data() + size_t(y) * width;
    const double* add = rows.data() + size_t(wrap(y + radius + 1, height)) * width;
    const double* sub = rows.data() + size_t(wrap(y - radius, height)) * width;
    for (int x = 0; x < width; ++x) {
      d[x] = acc[x];
      acc[x] += add[x] - sub[x];
    }
  }
  return out;
}

MeanVar population_stats(const double* a, size_t n) {
  if (n == 0) return {};
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i];
  mean /= double(n);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = a[i] - mean;
    var += d * d;
  }
  var /= double(n);
  return {mean, var};
}

std::vector<double> circular_shift(const double* src, int width, int height,
                                   int dx, int dy) {
  std::vector<double> out(size_t(width) * size_t(height));
  for (int y = 0; y < height; ++y) {
    int sy = wrap(y - dy, height);
    for (int x = 0; x < width; ++x)
      out[size_t(y) * width + x] = src[size_t(sy) * width + wrap(x - dx, width)];
  }
  return out;
}

}  // namespace nsf
