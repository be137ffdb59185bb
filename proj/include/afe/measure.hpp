#pragma once

// Characterisation harness: frequency sweeps, octave filter banks, noise
// PSD, SNDR and spike-rate curves.

#include "afe/core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace afe {

enum class ReportKind { Sweep, Psd, SndrCurve, RateCurve };

std::string_view to_string(ReportKind k);

struct MeasurementReport {
  ReportKind kind = ReportKind::Sweep;
  std::vector<double> x;
  std::vector<double> y;
  std::map<std::string, std::string> metadata;

  /// Throws std::invalid_argument unless x is strictly increasing and |x| == |y|.
  void validate() const;
};

std::vector<double> log_space(double lo, double hi, std::size_t n);
std::vector<double> lin_space(double lo, double hi, std::size_t n);

struct SweepOptions {
  double amplitude = 1e-3;  // V, stimulus amplitude
  double fs = 0.0;          // 0: per point, max(48 kHz, oversample * max(f0, f))
  double oversample = 32.0;
};

/// Measured gain |out| / |in| of the noiseless chain for a tone at f.
double measure_gain(const ChannelConfig& cfg, double f, const SweepOptions& opts = {});

/// Gain in dB at every frequency (strictly increasing). Noise is disabled.
MeasurementReport frequency_sweep(const ChannelConfig& cfg, std::span<const double> freqs,
                                  const SweepOptions& opts = {});

struct ResponseMetrics {
  double peak_hz = 0.0;
  double peak_db = 0.0;
  std::optional<double> lower_3db_hz;
  std::optional<double> upper_3db_hz;

  /// f_peak / (-3 dB width) of the measured curve.
  std::optional<double> q_measured() const;
  /// Q of one of the two identical sections that produce q_measured():
  /// each sits at -1.5 dB at the cascade's -3 dB edges.
  std::optional<double> section_q() const;
};

/// Peak (grid argmax) and linearly interpolated -3 dB edges of a sweep.
ResponseMetrics response_metrics(const MeasurementReport& sweep);

struct BankOptions {
  double q = 2.0;
  bool octave = true;  // false: every channel at f_lo
  CapCode cap_code{255};
  double c_base = 10e-12;
  double fs = 0.0;  // when > 0, the top centre must sit below fs / 2
  ChannelConfig base;
};

/// n channels with f0 = f_lo * 2^k, tuned through gm at fixed cap codes.
/// Throws std::invalid_argument for n outside 1..16 or a centre that aliases.
std::vector<ChannelConfig> octave_bank(double f_lo, int n, const BankOptions& opts = {});

/// One-sided Welch PSD (V^2/Hz) from Hann-windowed segments.
/// Throws std::invalid_argument unless 2 <= seg_len <= size and 0 <= overlap < 1.
MeasurementReport welch_psd(const SampledSignal& x, std::size_t seg_len, double overlap);

/// Integral of a PSD report over [f_lo, f_hi] (bin sum times bin width).
double integrate_psd(const MeasurementReport& psd, double f_lo, double f_hi);

/// PSD divided bin by bin by |analytic_response|^2; DC bin dropped.
MeasurementReport input_referred(const MeasurementReport& psd, const ChannelConfig& cfg);

/// Least-squares log-log slope of a PSD over [f_lo, f_hi], dB per decade.
double psd_slope_db_per_decade(const MeasurementReport& psd, double f_lo, double f_hi);

struct SndrOptions {
  double band_lo = 10.0;
  double band_hi = 0.0;  // 0: fs / 2
};

/// Fundamental power over all other in-band power, in dB. The fundamental
/// (with DC) comes from a least-squares fit at f0; everything left in the
/// band, except the +/-1 bins around f0, counts as noise and distortion.
/// Throws std::invalid_argument when y spans fewer than 20 periods.
double sndr(const SampledSignal& y, double f0, const SndrOptions& opts = {});

struct SndrSweepOptions {
  double fs = 48000.0;
  double duration_s = 1.0;
  double settle_s = 0.2;
  SndrOptions band;
};

/// SNDR at the chain output for tones of each amplitude (V, strictly
/// increasing) at tone_hz. Noise as configured, saturation as configured.
/// Report x is the input amplitude in dBV.
MeasurementReport sndr_vs_amplitude(const ChannelConfig& cfg, std::span<const double> amplitudes,
                                    double tone_hz, std::uint64_t seed,
                                    const SndrSweepOptions& opts = {});

/// 20 log10((v_sat / sqrt 2) / output noise rms), the noise rms integrated
/// from the model density through |analytic_response|^2 over the band.
double configured_dynamic_range_db(const ChannelConfig& cfg, double fs,
                                   const SndrOptions& band = {});

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares; nullopt for fewer than two points or constant x.
std::optional<LinearFit> fit_line(std::span<const double> x, std::span<const double> y);

struct RateOptions {
  double duration_s = 2.0;
  double fs = 0.0;  // 0: max(48 kHz, LIF step requirement at the largest amplitude)
  bool through_pipeline = false;
};

struct RateCurve {
  MeasurementReport report;    // x: amplitude (V), y: mean rate (Hz)
  std::optional<LinearFit> fit;  // over the points with non-zero rate
  double fs = 0.0;
};

/// PFM-encodes a tone (tone_hz = 0: constant level) per amplitude and reports
/// the mean spike rate. Constant levels use (#spikes - 1) / (last - first).
RateCurve rate_vs_amplitude(const ChannelConfig& cfg, std::span<const double> amplitudes,
                            double tone_hz, const RateOptions& opts = {});

}  // namespace afe
