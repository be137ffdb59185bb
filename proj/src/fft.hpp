#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace afe::detail {

/// Planned real-to-complex DFT of a fixed length; bins 0..n/2.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  const std::vector<std::complex<double>>& transform(std::span<const double> x);

 private:
  std::size_t n_;
  double* in_ = nullptr;
  void* out_ = nullptr;
  void* plan_ = nullptr;
  std::vector<std::complex<double>> bins_;
};

}  // namespace afe::detail
