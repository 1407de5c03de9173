#pragma once

#include <cstddef>
#include <vector>

namespace nsf {

// Wraps an index onto [0, n); works for any offset magnitude.
inline int wrap(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

// Sliding (2*radius+1)^2 window sum over a circularly extended grid,
// computed in O(N) with separable running sums.  Windows larger than the
// grid wrap around and count samples once per covered offset.
std::vector<double> box_sum_circular(const double* src, int width, int height,
                                     int radius);

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // population variance
};

MeanVar population_stats(const double* a, size_t n);

// Circularly shifts a grid by dx to the right and dy downward.
std::vector<double> circular_shift(const double* src, int width, int height,
                                   int dx, int dy);

}  // namespace nsf
