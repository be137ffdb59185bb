#include "afe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <stdexcept>

namespace afe {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFlickerBandLo = 0.1;  // Hz
constexpr int kShelvesPerDecade = 3;

// First-order shelf (1 + s/wz) / (1 + s/wp), corners pre-warped.
BiquadCoeffs design_shelf(double fp, double fz, double fs) {
  const double c = 2.0 * fs;
  const double wp = c * std::tan(kPi * fp / fs);
  const double wz = c * std::tan(kPi * fz / fs);
  const double n0 = 1.0 + c / wz, n1 = 1.0 - c / wz;
  const double d0 = 1.0 + c / wp, d1 = 1.0 - c / wp;
  BiquadCoeffs k;
  k.b0 = n0 / d0;
  k.b1 = n1 / d0;
  k.a1 = d1 / d0;
  k.fs = fs;
  return k;
}

}  // namespace

BpfParams bpf_params(const BpfConfig& bpf) {
  const double c1 = cap_from_code(bpf.c1_code, bpf.c_base);
  const double c2 = cap_from_code(bpf.c2_code, bpf.c_base);
  BpfParams p;
  p.f0 = std::sqrt(bpf.gm1 * bpf.gm2 / (c1 * c2)) / (2.0 * kPi);
  p.q = std::sqrt(bpf.gm2 * c2 / (bpf.gm1 * c1));
  return p;
}

std::complex<double> BiquadCoeffs::response(double f) const {
  const std::complex<double> zi = std::polar(1.0, -2.0 * kPi * f / fs);
  const std::complex<double> num = b0 + zi * (b1 + zi * b2);
  const std::complex<double> den = 1.0 + zi * (a1 + zi * a2);
  return num / den;
}

double BiquadCoeffs::pole_radius() const {
  // roots of z^2 + a1 z + a2
  const double disc = a1 * a1 - 4.0 * a2;
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    return std::max(std::abs((-a1 + s) / 2.0), std::abs((-a1 - s) / 2.0));
  }
  return std::sqrt(a2);
}

BiquadCoeffs design_biquad(double f0, double q, double fs) {
  if (!(fs > 0.0)) throw std::domain_error("design_biquad: sample rate must be positive");
  if (!(f0 > 0.0)) throw std::domain_error("design_biquad: centre frequency must be positive");
  if (f0 >= fs / 2.0) {
    throw std::domain_error(fmt::format(
        "design_biquad: centre frequency {:.6g} Hz aliases at sample rate {:.6g} Hz", f0, fs));
  }
  if (!(q > 0.0)) throw std::domain_error("design_biquad: Q must be positive");
  const double k = std::tan(kPi * f0 / fs);
  const double kq = k / q;
  const double norm = 1.0 / (1.0 + kq + k * k);
  BiquadCoeffs c;
  c.b0 = kq * norm;
  c.b1 = 0.0;
  c.b2 = -c.b0;
  c.a1 = 2.0 * (k * k - 1.0) * norm;
  c.a2 = (1.0 - kq + k * k) * norm;
  c.fs = fs;
  return c;
}

BiquadCoeffs design_highpass(double fc, double fs) {
  if (!(fc > 0.0) || fc >= fs / 2.0) {
    throw std::domain_error(fmt::format(
        "design_highpass: corner {:.6g} Hz not realisable at {:.6g} Hz", fc, fs));
  }
  const double k = std::tan(kPi * fc / fs);
  BiquadCoeffs c;
  c.b0 = 1.0 / (1.0 + k);
  c.b1 = -c.b0;
  c.a1 = (k - 1.0) / (k + 1.0);
  c.fs = fs;
  return c;
}

std::complex<double> analytic_response(const ChannelConfig& cfg, double f) {
  const double gain = gain_from_code(cfg.lna_gain) * gain_from_code(cfg.pga_gain);
  if (cfg.passthrough) return {gain, 0.0};
  const std::complex<double> s{0.0, 2.0 * kPi * f};
  const double wc = 2.0 * kPi * cfg.dsl_cutoff_hz;
  const std::complex<double> hpf = s / (s + wc);
  const BpfParams p = bpf_params(cfg.bpf);
  const double w0 = 2.0 * kPi * p.f0;
  const std::complex<double> bw = w0 / p.q;
  const std::complex<double> bpf = bw * s / (s * s + bw * s + w0 * w0);
  return gain * hpf * bpf * bpf;
}

NoiseState make_noise_state(const NoiseModel& model, double fs, std::uint64_t seed) {
  if (!(fs > 0.0)) throw std::invalid_argument("noise: sample rate must be positive");
  NoiseState st;
  st.fs = fs;
  st.rng.seed(seed);
  st.white_sigma = model.white_density * std::sqrt(fs / 2.0);
  if (!model.enabled || model.flicker_corner_hz <= 0.0 || model.white_density <= 0.0) {
    return st;
  }

  st.band_lo = kFlickerBandLo;
  st.band_hi = std::min(fs / 4.0, 100.0 * model.flicker_corner_hz);
  if (st.band_hi < 10.0 * st.band_lo) {
    throw std::invalid_argument(fmt::format(
        "noise: sample rate {:.6g} Hz too low to shape flicker noise", fs));
  }
  const double decades = std::log10(st.band_hi / st.band_lo);
  const int n = static_cast<int>(std::ceil(kShelvesPerDecade * decades));
  const double step = 1.0 / kShelvesPerDecade;
  for (int k = 0; k < n; ++k) {
    const double fp = st.band_lo * std::pow(10.0, k * step);
    const double fz = fp * std::pow(10.0, step / 2.0);
    st.shelves.push_back(design_shelf(fp, fz, fs));
  }
  st.shelf_state.assign(st.shelves.size(), BiquadState{});

  // Scale so that |H|^2 * f averages (geometrically) to the corner inside the band.
  st.flicker_gain = 1.0;
  const double lo = st.band_lo * std::sqrt(10.0);
  const double hi = st.band_hi / std::sqrt(10.0);
  const int points = std::max(8, static_cast<int>(50 * std::log10(hi / lo)));
  double acc = 0.0;
  for (int i = 0; i < points; ++i) {
    const double f = lo * std::pow(hi / lo, (i + 0.5) / points);
    const double g = flicker_shape_gain(st, f);
    acc += std::log(g * g * f);
  }
  const double mean = std::exp(acc / points);
  st.flicker_gain = std::sqrt(model.flicker_corner_hz / mean);
  return st;
}

double flicker_shape_gain(const NoiseState& state, double f) {
  std::complex<double> h{state.flicker_gain, 0.0};
  for (const auto& s : state.shelves) h *= s.response(f);
  return std::abs(h);
}

std::vector<double> inject_noise(std::size_t n, const NoiseModel& model, NoiseState& state) {
  std::vector<double> out(n, 0.0);
  if (!model.enabled) return out;
  const bool flicker = !state.shelves.empty();
  for (std::size_t i = 0; i < n; ++i) {
    double v = state.white_sigma * state.normal(state.rng);
    if (flicker) {
      double u = state.white_sigma * state.normal(state.rng);
      for (std::size_t k = 0; k < state.shelves.size(); ++k) {
        u = state.shelf_state[k].step(state.shelves[k], u);
      }
      v += state.flicker_gain * u;
    }
    out[i] = v;
  }
  return out;
}

PipelineState make_pipeline_state(const ChannelConfig& cfg, double fs, std::uint64_t seed) {
  PipelineState st;
  st.fs = fs;
  st.noise = make_noise_state(cfg.noise, fs, seed);
  return st;
}

void reset(PipelineState& state, const ChannelConfig& cfg, std::uint64_t seed) {
  state = make_pipeline_state(cfg, state.fs, seed);
}

SampledSignal process_block(const ChannelConfig& cfg, PipelineState& state,
                            const SampledSignal& x) {
  x.validate();
  if (std::abs(x.fs - state.fs) > 1e-12 * state.fs) {
    throw std::invalid_argument(fmt::format(
        "process_block: signal rate {:.6g} Hz differs from pipeline rate {:.6g} Hz", x.fs,
        state.fs));
  }
  const double lna = gain_from_code(cfg.lna_gain);
  const double pga = gain_from_code(cfg.pga_gain);

  BiquadCoeffs hpf, bpf;
  if (!cfg.passthrough) {
    hpf = design_highpass(cfg.dsl_cutoff_hz, x.fs);
    const BpfParams p = bpf_params(cfg.bpf);
    bpf = design_biquad(p.f0, p.q, x.fs);
    if (!(bpf.pole_radius() < 1.0) || !(hpf.pole_radius() < 1.0)) {
      throw std::domain_error("process_block: unstable filter coefficients");
    }
  }

  const std::vector<double> noise = inject_noise(x.size(), cfg.noise, state.noise);

  SampledSignal y;
  y.fs = x.fs;
  y.t0 = x.t0;
  y.samples.resize(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    double v = lna * (x.samples[n] + noise[n]);
    if (!cfg.passthrough) {
      v = state.hpf.step(hpf, v);
      v = state.bpf1.step(bpf, v);
      v = state.bpf2.step(bpf, v);
    }
    v *= pga;
    if (cfg.saturate) v = std::clamp(v, -cfg.v_sat, cfg.v_sat);
    y.samples[n] = v;
  }
  return y;
}

double default_sample_rate(const std::vector<ChannelConfig>& channels) {
  double f_max = 0.0;
  for (const auto& c : channels) {
    if (!c.passthrough) f_max = std::max(f_max, bpf_params(c.bpf).f0);
  }
  return std::max(48000.0, 32.0 * f_max);
}

}  // namespace afe
