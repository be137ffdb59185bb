#pragma once

// Shared data model for the event-based front-end simulator: signals,
// per-channel configuration, spike events and the DAC code mappings.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace afe {

inline constexpr int kNumChannels = 16;

/// Uniformly sampled voltage waveform. Sample n sits at t0 + n / fs.
struct SampledSignal {
  double fs = 0.0;  // Hz
  double t0 = 0.0;  // s
  std::vector<double> samples;  // V

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / fs; }

  /// Timestamp of sample n in integer nanoseconds.
  std::int64_t time_ns(std::size_t n) const;

  /// Sub-range [begin, end) with t0 advanced accordingly.
  SampledSignal slice(std::size_t begin, std::size_t end) const;

  /// Throws std::invalid_argument unless fs > 0, size >= 1 and all samples are finite.
  void validate() const;
};

/// 4-bit amplifier gain code.
struct GainCode {
  int value = 0;
  static constexpr int kMax = 15;
  constexpr bool valid() const { return value >= 0 && value <= kMax; }
  friend constexpr bool operator==(GainCode, GainCode) = default;
};

/// 8-bit filter capacitor code.
struct CapCode {
  int value = 255;
  static constexpr int kMax = 255;
  constexpr bool valid() const { return value >= 0 && value <= kMax; }
  friend constexpr bool operator==(CapCode, CapCode) = default;
};

struct BpfConfig {
  double gm1 = 6.283185307179586e-9;  // S
  double gm2 = 6.283185307179586e-9;  // S
  CapCode c1_code{255};
  CapCode c2_code{255};
  double c_base = 10e-12;  // F

  bool operator==(const BpfConfig&) const = default;
};

struct AdmConfig {
  double delta_up = 10e-3;         // V
  double delta_dn = 10e-3;         // V
  double hysteresis = 1e-3;        // V
  double v_ref_init = 0.0;         // V
  double threshold_sigma = 300e-6; // V, static per-instance threshold error

  bool operator==(const AdmConfig&) const = default;
};

struct PfmConfig {
  double gm_amp = 1e-9;   // S
  double c_mem = 1e-12;   // F
  double v_th = 0.5;      // V
  double v_reset = 0.0;   // V
  double i_leak = 1e-12;  // A
  double t_refr = 100e-6; // s

  bool operator==(const PfmConfig&) const = default;
};

/// Input-referred noise: one-sided density white_density^2 * (1 + corner / f).
struct NoiseModel {
  double white_density = 15.74e-9;  // V/sqrt(Hz)
  double flicker_corner_hz = 1000.0;
  bool enabled = false;

  bool operator==(const NoiseModel&) const = default;

  /// White density giving `rms` volts integrated over [f_lo, f_hi] for the given corner.
  static NoiseModel calibrated(double rms, double f_lo, double f_hi, double corner_hz);

  /// Integral of the one-sided density over [f_lo, f_hi], in V^2.
  double band_power(double f_lo, double f_hi) const;
};

enum class Mode { Adm, Pfm };
enum class Source { Adm, Pfm };
enum class Polarity { Up, Dn, Na };

struct ChannelConfig {
  int channel = 0;
  GainCode lna_gain{0};
  GainCode pga_gain{0};
  double dsl_cutoff_hz = 1.0;
  BpfConfig bpf;
  Mode mode = Mode::Adm;
  AdmConfig adm;
  PfmConfig pfm;
  NoiseModel noise;
  // Bypass the DC servo and the bandpass: gains only.
  bool passthrough = false;
  // Optional hard clip after the PGA.
  bool saturate = false;
  double v_sat = 0.9;

  bool operator==(const ChannelConfig&) const = default;
};

struct Event {
  std::int64_t t_ns = 0;
  Source source = Source::Adm;
  int channel = 0;
  Polarity polarity = Polarity::Up;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Throws std::invalid_argument when the polarity does not match the source
/// or the channel / timestamp is out of range.
void validate_event(const Event& e);

struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Every violated invariant of `cfg`, each tagged with its field path.
std::vector<Violation> validate_config(const ChannelConfig& cfg);

/// Forward-Euler step constraint of the LIF integrator: dt <= 0.01 * c_mem *
/// (v_th - v_reset) / i_max with i_max = gm_amp * v_peak.
std::vector<Violation> validate_pfm_timestep(const PfmConfig& pfm, double fs, double v_peak);

/// Lowest sample rate satisfying validate_pfm_timestep.
double min_pfm_sample_rate(const PfmConfig& pfm, double v_peak);

/// Linear voltage gain; uniform 1.6 dB steps from 0 dB (code 0) to 24 dB (code 15).
double gain_from_code(GainCode code);
double gain_db_from_code(GainCode code);

/// Effective capacitance c_base * (code + 1) / 256.
double cap_from_code(CapCode code, double c_base);

std::string_view to_string(Mode m);
std::string_view to_string(Source s);
std::string_view to_string(Polarity p);
Mode mode_from_string(std::string_view s);
Source source_from_string(std::string_view s);
Polarity polarity_from_string(std::string_view s);

/// Canonical key = value dump, one field per line. Stable across runs.
std::string canonical_text(const ChannelConfig& cfg);

/// FNV-1a 64 of canonical_text.
std::uint64_t config_hash(const ChannelConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes);

/// Derives an independent stream seed from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace afe
