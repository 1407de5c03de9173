#include "nsf/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "nsf/error.hpp"

namespace nsf::fft {

namespace {

// FFTW planning mutates shared planner state and is not thread-safe;
// execution of a created plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0)
    fail(ErrorCode::invalid_parameter, "FFT of an empty grid");
}

}  // namespace

std::vector<std::complex<double>> forward(const double* src, int width,
                                          int height) {
  check_dims(width, height);
  const size_t n = size_t(width) * size_t(height);
  std::vector<std::complex<double>> in(n), out(n);
  for (size_t i = 0; i < n; ++i) in[i] = src[i];

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_2d(height, width,
                            reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()),
                            FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

std::vector<double> inverse(const std::complex<double>* spectrum, int width,
                            int height) {
  check_dims(width, height);
  const size_t n = size_t(width) * size_t(height);
  std::vector<std::complex<double>> in(spectrum, spectrum + n), out(n);

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_2d(height, width,
                            reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()),
                            FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> real(n);
  const double scale = 1.0 / double(n);
  for (size_t i = 0; i < n; ++i) real[i] = out[i].real() * scale;
  return real;
}

}  // namespace nsf::fft
