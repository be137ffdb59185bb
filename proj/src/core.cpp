#include "afe/core.hpp"

#include <cmath>
#include <fmt/format.h>
#include <stdexcept>

namespace afe {

std::int64_t SampledSignal::time_ns(std::size_t n) const {
  return std::llround((t0 + static_cast<double>(n) / fs) * 1e9);
}

SampledSignal SampledSignal::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > samples.size()) {
    throw std::out_of_range("SampledSignal::slice: bad range");
  }
  SampledSignal out;
  out.fs = fs;
  out.t0 = t0 + static_cast<double>(begin) / fs;
  out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

void SampledSignal::validate() const {
  if (!(fs > 0.0) || !std::isfinite(fs)) {
    throw std::invalid_argument("signal: sample rate must be positive");
  }
  if (!std::isfinite(t0)) throw std::invalid_argument("signal: t0 must be finite");
  if (samples.empty()) throw std::invalid_argument("signal: no samples");
  for (double v : samples) {
    if (!std::isfinite(v)) throw std::invalid_argument("signal: non-finite sample");
  }
}

NoiseModel NoiseModel::calibrated(double rms, double f_lo, double f_hi, double corner_hz) {
  NoiseModel m;
  m.enabled = true;
  m.flicker_corner_hz = corner_hz;
  m.white_density = 1.0;
  m.white_density = rms / std::sqrt(m.band_power(f_lo, f_hi));
  return m;
}

double NoiseModel::band_power(double f_lo, double f_hi) const {
  if (!(f_lo > 0.0) || !(f_hi > f_lo)) {
    throw std::invalid_argument("NoiseModel::band_power: need 0 < f_lo < f_hi");
  }
  const double d2 = white_density * white_density;
  return d2 * ((f_hi - f_lo) + flicker_corner_hz * std::log(f_hi / f_lo));
}

void validate_event(const Event& e) {
  if (e.t_ns < 0) throw std::invalid_argument("event: negative timestamp");
  if (e.channel < 0 || e.channel >= kNumChannels) {
    throw std::invalid_argument("event: channel out of range");
  }
  const bool adm_pol = e.polarity == Polarity::Up || e.polarity == Polarity::Dn;
  if ((e.source == Source::Adm) != adm_pol) {
    throw std::invalid_argument("event: polarity does not match source");
  }
}

namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }
bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::vector<Violation> validate_config(const ChannelConfig& cfg) {
  std::vector<Violation> out;
  auto fail = [&](std::string field, std::string msg) {
    out.push_back({std::move(field), std::move(msg)});
  };

  if (cfg.channel < 0 || cfg.channel >= kNumChannels) {
    fail("channel", fmt::format("must be in 0..{}, got {}", kNumChannels - 1, cfg.channel));
  }
  if (!cfg.lna_gain.valid()) fail("lna_gain", "must be in 0..15");
  if (!cfg.pga_gain.valid()) fail("pga_gain", "must be in 0..15");
  if (!finite_positive(cfg.dsl_cutoff_hz)) fail("dsl_cutoff_hz", "must be > 0");

  if (!finite_positive(cfg.bpf.gm1)) fail("bpf.gm1", "must be > 0");
  if (!finite_positive(cfg.bpf.gm2)) fail("bpf.gm2", "must be > 0");
  if (!cfg.bpf.c1_code.valid()) fail("bpf.c1_code", "must be in 0..255");
  if (!cfg.bpf.c2_code.valid()) fail("bpf.c2_code", "must be in 0..255");
  if (!finite_positive(cfg.bpf.c_base)) fail("bpf.c_base", "must be > 0");

  const AdmConfig& adm = cfg.adm;
  if (!finite_positive(adm.delta_up)) fail("adm.delta_up", "must be > 0");
  if (!finite_positive(adm.delta_dn)) fail("adm.delta_dn", "must be > 0");
  if (!finite_non_negative(adm.hysteresis)) fail("adm.hysteresis", "must be >= 0");
  if (std::isfinite(adm.delta_up) && std::isfinite(adm.hysteresis) &&
      !(adm.delta_up > adm.hysteresis)) {
    fail("adm.delta_up", "must exceed adm.hysteresis");
  }
  if (std::isfinite(adm.delta_dn) && std::isfinite(adm.hysteresis) &&
      !(adm.delta_dn > adm.hysteresis)) {
    fail("adm.delta_dn", "must exceed adm.hysteresis");
  }
  if (!std::isfinite(adm.v_ref_init)) fail("adm.v_ref_init", "must be finite");
  if (!finite_non_negative(adm.threshold_sigma)) fail("adm.threshold_sigma", "must be >= 0");

  const PfmConfig& pfm = cfg.pfm;
  if (!finite_positive(pfm.gm_amp)) fail("pfm.gm_amp", "must be > 0");
  if (!finite_positive(pfm.c_mem)) fail("pfm.c_mem", "must be > 0");
  if (!finite_non_negative(pfm.v_reset)) fail("pfm.v_reset", "must be >= 0");
  if (!std::isfinite(pfm.v_th) || !(pfm.v_th > pfm.v_reset)) {
    fail("pfm.v_th", "must exceed pfm.v_reset");
  }
  if (!finite_non_negative(pfm.i_leak)) fail("pfm.i_leak", "must be >= 0");
  if (!finite_non_negative(pfm.t_refr)) fail("pfm.t_refr", "must be >= 0");

  if (!finite_non_negative(cfg.noise.white_density)) fail("noise.white_density", "must be >= 0");
  if (!finite_non_negative(cfg.noise.flicker_corner_hz)) {
    fail("noise.flicker_corner_hz", "must be >= 0");
  }
  if (!finite_positive(cfg.v_sat)) fail("v_sat", "must be > 0");
  return out;
}

double min_pfm_sample_rate(const PfmConfig& pfm, double v_peak) {
  const double i_max = pfm.gm_amp * std::max(v_peak, 0.0);
  if (i_max <= 0.0) return 0.0;
  return i_max / (0.01 * pfm.c_mem * (pfm.v_th - pfm.v_reset));
}

std::vector<Violation> validate_pfm_timestep(const PfmConfig& pfm, double fs, double v_peak) {
  std::vector<Violation> out;
  const double needed = min_pfm_sample_rate(pfm, v_peak);
  if (fs < needed) {
    out.push_back({"pfm", fmt::format("integration step too coarse: sample rate {:.6g} Hz "
                                      "below required {:.6g} Hz for peak {:.6g} V",
                                      fs, needed, v_peak)});
  }
  return out;
}

double gain_db_from_code(GainCode code) {
  if (!code.valid()) throw std::invalid_argument("gain code out of range");
  return 24.0 * code.value / GainCode::kMax;
}

double gain_from_code(GainCode code) {
  if (code.value == 0 && code.valid()) return 1.0;
  return std::pow(10.0, gain_db_from_code(code) / 20.0);
}

double cap_from_code(CapCode code, double c_base) {
  if (!code.valid()) throw std::invalid_argument("cap code out of range");
  if (!(c_base > 0.0)) throw std::invalid_argument("c_base must be positive");
  return c_base * (code.value + 1) / 256.0;
}

std::string_view to_string(Mode m) { return m == Mode::Adm ? "ADM" : "PFM"; }
std::string_view to_string(Source s) { return s == Source::Adm ? "ADM" : "PFM"; }

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::Up: return "UP";
    case Polarity::Dn: return "DN";
    case Polarity::Na: return "NA";
  }
  return "NA";
}

Mode mode_from_string(std::string_view s) {
  if (s == "ADM") return Mode::Adm;
  if (s == "PFM") return Mode::Pfm;
  throw std::invalid_argument(fmt::format("unknown mode '{}'", s));
}

Source source_from_string(std::string_view s) {
  if (s == "ADM") return Source::Adm;
  if (s == "PFM") return Source::Pfm;
  throw std::invalid_argument(fmt::format("unknown source '{}'", s));
}

Polarity polarity_from_string(std::string_view s) {
  if (s == "UP") return Polarity::Up;
  if (s == "DN") return Polarity::Dn;
  if (s == "NA") return Polarity::Na;
  throw std::invalid_argument(fmt::format("unknown polarity '{}'", s));
}

std::string canonical_text(const ChannelConfig& c) {
  std::string s;
  auto put = [&](std::string_view key, const auto& v) {
    s += fmt::format("{} = {}\n", key, v);
  };
  put("channel", c.channel);
  put("lna_gain", c.lna_gain.value);
  put("pga_gain", c.pga_gain.value);
  put("dsl_cutoff_hz", c.dsl_cutoff_hz);
  put("bpf.gm1", c.bpf.gm1);
  put("bpf.gm2", c.bpf.gm2);
  put("bpf.c1_code", c.bpf.c1_code.value);
  put("bpf.c2_code", c.bpf.c2_code.value);
  put("bpf.c_base", c.bpf.c_base);
  put("mode", to_string(c.mode));
  put("adm.delta_up", c.adm.delta_up);
  put("adm.delta_dn", c.adm.delta_dn);
  put("adm.hysteresis", c.adm.hysteresis);
  put("adm.v_ref_init", c.adm.v_ref_init);
  put("adm.threshold_sigma", c.adm.threshold_sigma);
  put("pfm.gm_amp", c.pfm.gm_amp);
  put("pfm.c_mem", c.pfm.c_mem);
  put("pfm.v_th", c.pfm.v_th);
  put("pfm.v_reset", c.pfm.v_reset);
  put("pfm.i_leak", c.pfm.i_leak);
  put("pfm.t_refr", c.pfm.t_refr);
  put("noise.white_density", c.noise.white_density);
  put("noise.flicker_corner_hz", c.noise.flicker_corner_hz);
  put("noise.enabled", c.noise.enabled);
  put("passthrough", c.passthrough);
  put("saturate", c.saturate);
  put("v_sat", c.v_sat);
  return s;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ChannelConfig& cfg) { return fnv1a64(canonical_text(cfg)); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  // splitmix64 finaliser over the combined words
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace afe
