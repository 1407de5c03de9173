#pragma once

// Baseline fusion used as the comparison point in acceptance testing:
// the same transform, but a 0.5/0.5 low-band average and a plain
// choose-max-by-magnitude rule in the high bands.

#include <algorithm>
#include <cmath>

#include "nsf/image.hpp"
#include "nsf/nsst.hpp"

namespace testsupport {

inline nsf::GrayImage naive_fuse(const nsf::GrayImage& a,
                                 const nsf::GrayImage& b,
                                 const nsf::DecompositionSpec& spec) {
  nsf::check_pair(a, b);
  nsf::NsstDecomposition da = nsf::decompose(a, spec);
  const nsf::NsstDecomposition db = nsf::decompose(b, spec);

  for (size_t i = 0; i < da.low.coeffs.size(); ++i)
    da.low.coeffs[i] = 0.5 * (da.low.coeffs[i] + db.low.coeffs[i]);

  for (size_t j = 0; j < da.highs.size(); ++j)
    for (size_t k = 0; k < da.highs[j].size(); ++k) {
      auto& ha = da.highs[j][k].coeffs;
      const auto& hb = db.highs[j][k].coeffs;
      for (size_t i = 0; i < ha.size(); ++i)
        if (std::abs(hb[i]) > std::abs(ha[i])) ha[i] = hb[i];
    }

  nsf::GrayImage fused = nsf::reconstruct(da);
  for (double& v : fused.data) v = std::clamp(v, 0.0, 255.0);
  return fused;
}

}  // namespace testsupport
