#include "fft.hpp"

#include <algorithm>
#include <fftw3.h>
#include <stdexcept>

namespace afe::detail {

RealFft::RealFft(std::size_t n) : n_(n), bins_(n / 2 + 1) {
  if (n < 1) throw std::invalid_argument("RealFft: empty transform");
  in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  out_ = out;
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  fftw_free(out_);
  fftw_free(in_);
}

const std::vector<std::complex<double>>& RealFft::transform(std::span<const double> x) {
  if (x.size() != n_) throw std::invalid_argument("RealFft: length mismatch");
  std::copy(x.begin(), x.end(), in_);
  fftw_execute(static_cast<fftw_plan>(plan_));
  const auto* out = static_cast<const fftw_complex*>(out_);
  for (std::size_t k = 0; k < bins_.size(); ++k) bins_[k] = {out[k][0], out[k][1]};
  return bins_;
}

}  // namespace afe::detail
