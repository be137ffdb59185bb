#pragma once

#include "afe/core.hpp"

#include <cstdint>
#include <span>

namespace afe {

/// Output grid for the decoders. Sample k sits at t0_ns + round(k * 1e9 / fs).
/// n_samples = 0 means "up to and including the last event".
struct DecodeGrid {
  double fs = 0.0;
  std::int64_t t0_ns = 0;
  std::size_t n_samples = 0;
};

struct AdmDecodeParams {
  double delta_up = 10e-3;
  double delta_dn = 10e-3;
  double v0 = 0.0;
  // First-order low-pass corner applied to the staircase; 0 disables it.
  double smoothing_hz = 0.0;
};

/// Staircase v0 + delta_up * #UP(<= t) - delta_dn * #DN(<= t) on the grid.
/// Throws std::invalid_argument for a non-ADM or unordered stream.
SampledSignal adm_reconstruct(std::span<const Event> events, const AdmDecodeParams& params,
                              const DecodeGrid& grid);

/// Rectangular sliding-window rate: #events in (t - window, t] / window, in Hz.
/// Throws std::invalid_argument for a non-PFM or unordered stream, or window <= 0.
SampledSignal pfm_rate_decode(std::span<const Event> events, double window_s,
                              const DecodeGrid& grid);

}  // namespace afe
