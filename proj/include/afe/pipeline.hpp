#pragma once

// Discrete-time model of one channel's conditioning chain:
//   noise (input-referred) -> LNA -> DC-servo high-pass -> BPF x2 -> PGA -> optional clip

#include "afe/core.hpp"

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace afe {

struct BpfParams {
  double f0 = 0.0;  // Hz
  double q = 0.0;
};

/// Centre frequency and quality factor of one filter section from its
/// transconductances and CDAC capacitances.
BpfParams bpf_params(const BpfConfig& bpf);

/// Normalised direct-form coefficients: y = b0 x + b1 x1 + b2 x2 - a1 y1 - a2 y2.
struct BiquadCoeffs {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
  double fs = 0.0;

  std::complex<double> response(double f) const;
  /// Largest pole magnitude.
  double pole_radius() const;
};

/// Bandpass H(s) = (w0/Q) s / (s^2 + (w0/Q) s + w0^2), bilinear transform
/// pre-warped at f0, so |H| = 1 at f0. Throws std::domain_error unless 0 < f0 < fs/2.
BiquadCoeffs design_biquad(double f0, double q, double fs);

/// First-order high-pass s / (s + wc) through the pre-warped bilinear transform.
BiquadCoeffs design_highpass(double fc, double fs);

/// Transposed direct form II section state.
struct BiquadState {
  double z1 = 0.0, z2 = 0.0;

  double step(const BiquadCoeffs& c, double x) {
    const double y = c.b0 * x + z1;
    z1 = c.b1 * x - c.a1 * y + z2;
    z2 = c.b2 * x - c.a2 * y;
    return y;
  }
};

/// Continuous-time complex gain of the whole chain (LNA * HPF * BPF^2 * PGA) at f.
std::complex<double> analytic_response(const ChannelConfig& cfg, double f);

/// Seeded generator state for inject_noise. White and flicker parts draw
/// from separate streams; the flicker part runs through a cascade of
/// pole/zero shelves, three per decade, approximating a -10 dB/decade slope.
struct NoiseState {
  double fs = 0.0;
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  std::vector<BiquadCoeffs> shelves;
  std::vector<BiquadState> shelf_state;
  double flicker_gain = 0.0;
  double white_sigma = 0.0;

  // Band over which the 1/f shape is synthesised.
  double band_lo = 0.0;
  double band_hi = 0.0;
};

NoiseState make_noise_state(const NoiseModel& model, double fs, std::uint64_t seed);

/// Next n input-referred noise samples (all zero when the model is disabled).
std::vector<double> inject_noise(std::size_t n, const NoiseModel& model, NoiseState& state);

/// Magnitude response of the flicker shaping cascade including its gain,
/// so PSD_flicker(f) = white_density^2 * |H(f)|^2.
double flicker_shape_gain(const NoiseState& state, double f);

struct PipelineState {
  double fs = 0.0;
  BiquadState hpf;
  BiquadState bpf1;
  BiquadState bpf2;
  NoiseState noise;
};

PipelineState make_pipeline_state(const ChannelConfig& cfg, double fs, std::uint64_t seed);

/// Zeroes every filter state and rewinds the noise generator to `seed`.
void reset(PipelineState& state, const ChannelConfig& cfg, std::uint64_t seed);

/// Runs one block through the chain, carrying filter and noise state so two
/// consecutive blocks produce the same samples as one concatenated block.
/// Throws std::invalid_argument on sample-rate mismatch, std::domain_error
/// when the filter cannot be realised at this rate.
SampledSignal process_block(const ChannelConfig& cfg, PipelineState& state,
                            const SampledSignal& x);

/// Default simulation rate: 32 x the highest centre frequency, at least 48 kHz.
double default_sample_rate(const std::vector<ChannelConfig>& channels);

}  // namespace afe
