#pragma once

#include <complex>
#include <vector>

namespace nsf::fft {

// Unnormalized forward 2-D DFT of a height x width real grid (row-major).
std::vector<std::complex<double>> forward(const double* src, int width,
                                          int height);

// Inverse 2-D DFT scaled by 1/(width*height); returns the real part.
std::vector<double> inverse(const std::complex<double>* spectrum, int width,
                            int height);

}  // namespace nsf::fft
