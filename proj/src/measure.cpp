#include "afe/measure.hpp"

#include "afe/encoders.hpp"
#include "afe/pipeline.hpp"
#include "fft.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace afe {

namespace {

constexpr double kPi = std::numbers::pi;

struct SineFit {
  double a = 0.0;  // cos coefficient
  double b = 0.0;  // sin coefficient
  double dc = 0.0;
  double amplitude() const { return std::hypot(a, b); }
};

// Least-squares fit of a cos(wn) + b sin(wn) + dc over samples [begin, end).
SineFit fit_sine(std::span<const double> y, double f, double fs) {
  const double w = 2.0 * kPi * f / fs;
  // Normal equations over the basis (cos, sin, 1).
  std::array<std::array<double, 4>, 3> m{};
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double c = std::cos(w * static_cast<double>(n));
    const double s = std::sin(w * static_cast<double>(n));
    const std::array<double, 3> basis{c, s, 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += basis[i] * basis[j];
      m[i][3] += basis[i] * y[n];
    }
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    if (m[col][col] == 0.0) throw std::domain_error("fit_sine: singular system");
    for (int r = col + 1; r < 3; ++r) {
      const double k = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= k * m[col][c];
    }
  }
  std::array<double, 3> sol{};
  for (int r = 2; r >= 0; --r) {
    double acc = m[r][3];
    for (int c = r + 1; c < 3; ++c) acc -= m[r][c] * sol[c];
    sol[r] = acc / m[r][r];
  }
  return {sol[0], sol[1], sol[2]};
}

SampledSignal tone(double amplitude, double f, double fs, std::size_t n) {
  SampledSignal s;
  s.fs = fs;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.samples[i] = f > 0.0 ? amplitude * std::sin(2.0 * kPi * f * static_cast<double>(i) / fs)
                           : amplitude;
  }
  return s;
}

void require_increasing(std::span<const double> v, std::string_view who) {
  if (v.empty()) throw std::invalid_argument(fmt::format("{}: empty grid", who));
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) {
      throw std::invalid_argument(fmt::format("{}: grid must be strictly increasing", who));
    }
  }
}

}  // namespace

std::string_view to_string(ReportKind k) {
  switch (k) {
    case ReportKind::Sweep: return "SWEEP";
    case ReportKind::Psd: return "PSD";
    case ReportKind::SndrCurve: return "SNDR_CURVE";
    case ReportKind::RateCurve: return "RATE_CURVE";
  }
  return "?";
}

void MeasurementReport::validate() const {
  if (x.size() != y.size()) throw std::invalid_argument("report: x and y lengths differ");
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw std::invalid_argument("report: x not strictly increasing");
  }
}

std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw std::invalid_argument("log_space: bad range");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  v.back() = hi;
  return v;
}

std::vector<double> lin_space(double lo, double hi, std::size_t n) {
  if (n == 1) return {lo};
  if (!(hi > lo) || n < 2) throw std::invalid_argument("lin_space: bad range");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  v.back() = hi;
  return v;
}

double measure_gain(const ChannelConfig& cfg, double f, const SweepOptions& opts) {
  if (!(f > 0.0)) throw std::invalid_argument("measure_gain: frequency must be positive");
  ChannelConfig quiet = cfg;
  quiet.noise.enabled = false;

  double f0 = 0.0, q = 0.0;
  if (!cfg.passthrough) {
    const BpfParams p = bpf_params(cfg.bpf);
    f0 = p.f0;
    q = p.q;
  }
  const double fs = opts.fs > 0.0 ? opts.fs
                                  : std::max(48000.0, opts.oversample * std::max(f0, f));
  if (f >= fs / 2.0) {
    throw std::invalid_argument(
        fmt::format("measure_gain: {:.6g} Hz not below Nyquist of {:.6g} Hz", f, fs));
  }

  // Settle for 10 stimulus periods plus ~30 filter time constants, then
  // measure over a whole number of periods spanning at least 20 Q / f0.
  double settle = 10.0 / f;
  double window = 20.0 / f;
  if (f0 > 0.0) {
    settle += 10.0 * q / f0;
    window = std::max(window, 20.0 * q / f0);
  }
  const double periods = std::ceil(window * f);
  const auto n_settle = static_cast<std::size_t>(std::ceil(settle * fs));
  const auto n_meas = static_cast<std::size_t>(std::llround(periods * fs / f));

  PipelineState st = make_pipeline_state(quiet, fs, 0);
  const SampledSignal out = process_block(quiet, st, tone(opts.amplitude, f, fs, n_settle + n_meas));
  const std::span<const double> tail(out.samples.data() + n_settle, n_meas);
  // Phase reference does not matter for the amplitude.
  return fit_sine(tail, f, fs).amplitude() / opts.amplitude;
}

MeasurementReport frequency_sweep(const ChannelConfig& cfg, std::span<const double> freqs,
                                  const SweepOptions& opts) {
  require_increasing(freqs, "frequency_sweep");
  MeasurementReport r;
  r.kind = ReportKind::Sweep;
  r.x.assign(freqs.begin(), freqs.end());
  r.y.reserve(freqs.size());
  for (double f : freqs) r.y.push_back(20.0 * std::log10(measure_gain(cfg, f, opts)));
  r.metadata["config_hash"] = fmt::format("{:016x}", config_hash(cfg));
  r.metadata["amplitude_v"] = fmt::format("{}", opts.amplitude);
  return r;
}

std::optional<double> ResponseMetrics::q_measured() const {
  if (!lower_3db_hz || !upper_3db_hz) return std::nullopt;
  return peak_hz / (*upper_3db_hz - *lower_3db_hz);
}

std::optional<double> ResponseMetrics::section_q() const {
  const auto qm = q_measured();
  if (!qm) return std::nullopt;
  return *qm * std::sqrt(std::sqrt(2.0) - 1.0);
}

ResponseMetrics response_metrics(const MeasurementReport& sweep) {
  sweep.validate();
  if (sweep.x.empty()) throw std::invalid_argument("response_metrics: empty sweep");
  const auto it = std::max_element(sweep.y.begin(), sweep.y.end());
  const auto k = static_cast<std::size_t>(it - sweep.y.begin());
  ResponseMetrics m;
  m.peak_hz = sweep.x[k];
  m.peak_db = *it;
  const double level = m.peak_db - 3.0103;  // half power

  // Interpolate in log-frequency between the bracketing points.
  auto crossing = [&](std::size_t i, std::size_t j) {
    const double t = (level - sweep.y[i]) / (sweep.y[j] - sweep.y[i]);
    return std::exp(std::log(sweep.x[i]) + t * (std::log(sweep.x[j]) - std::log(sweep.x[i])));
  };
  for (std::size_t i = k; i > 0; --i) {
    if (sweep.y[i - 1] <= level) {
      m.lower_3db_hz = crossing(i - 1, i);
      break;
    }
  }
  for (std::size_t i = k; i + 1 < sweep.y.size(); ++i) {
    if (sweep.y[i + 1] <= level) {
      m.upper_3db_hz = crossing(i, i + 1);
      break;
    }
  }
  return m;
}

std::vector<ChannelConfig> octave_bank(double f_lo, int n, const BankOptions& opts) {
  if (n < 1 || n > kNumChannels) {
    throw std::invalid_argument(fmt::format("octave_bank: channel count {} outside 1..16", n));
  }
  if (!(f_lo > 0.0)) throw std::invalid_argument("octave_bank: f_lo must be positive");
  if (!(opts.q > 0.0)) throw std::invalid_argument("octave_bank: Q must be positive");
  const double f_top = opts.octave ? f_lo * std::ldexp(1.0, n - 1) : f_lo;
  if (opts.fs > 0.0 && !(f_top < opts.fs / 2.0)) {
    throw std::invalid_argument(fmt::format(
        "octave_bank: top centre {:.6g} Hz not below Nyquist of {:.6g} Hz", f_top, opts.fs));
  }
  const double c = cap_from_code(opts.cap_code, opts.c_base);
  std::vector<ChannelConfig> bank;
  bank.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    ChannelConfig cfg = opts.base;
    cfg.channel = k;
    const double f0 = opts.octave ? f_lo * std::ldexp(1.0, k) : f_lo;
    const double g = 2.0 * kPi * f0 * c;
    cfg.bpf.c_base = opts.c_base;
    cfg.bpf.c1_code = opts.cap_code;
    cfg.bpf.c2_code = opts.cap_code;
    cfg.bpf.gm1 = g / opts.q;
    cfg.bpf.gm2 = g * opts.q;
    bank.push_back(cfg);
  }
  return bank;
}

MeasurementReport welch_psd(const SampledSignal& x, std::size_t seg_len, double overlap) {
  x.validate();
  if (seg_len < 2 || seg_len > x.size()) {
    throw std::invalid_argument("welch_psd: segment length must be in 2..signal length");
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw std::invalid_argument("welch_psd: overlap must be in [0, 1)");
  }
  const std::size_t hop = std::max<std::size_t>(
      1, seg_len - static_cast<std::size_t>(std::llround(overlap * static_cast<double>(seg_len))));

  std::vector<double> window(seg_len);
  double w2 = 0.0;
  for (std::size_t i = 0; i < seg_len; ++i) {
    // periodic Hann
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / seg_len);
    w2 += window[i] * window[i];
  }

  detail::RealFft fft(seg_len);
  const std::size_t n_bins = seg_len / 2 + 1;
  std::vector<double> acc(n_bins, 0.0);
  std::vector<double> seg(seg_len);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + seg_len <= x.size(); start += hop) {
    for (std::size_t i = 0; i < seg_len; ++i) seg[i] = x.samples[start + i] * window[i];
    const auto& bins = fft.transform(seg);
    for (std::size_t k = 0; k < n_bins; ++k) acc[k] += std::norm(bins[k]);
    ++segments;
  }

  MeasurementReport r;
  r.kind = ReportKind::Psd;
  r.x.resize(n_bins);
  r.y.resize(n_bins);
  const double scale = 1.0 / (x.fs * w2 * static_cast<double>(segments));
  for (std::size_t k = 0; k < n_bins; ++k) {
    const bool edge = k == 0 || (seg_len % 2 == 0 && k == n_bins - 1);
    r.x[k] = static_cast<double>(k) * x.fs / static_cast<double>(seg_len);
    r.y[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
  }
  r.metadata["seg_len"] = fmt::format("{}", seg_len);
  r.metadata["segments"] = fmt::format("{}", segments);
  r.metadata["fs"] = fmt::format("{}", x.fs);
  return r;
}

double integrate_psd(const MeasurementReport& psd, double f_lo, double f_hi) {
  if (psd.x.size() < 2) throw std::invalid_argument("integrate_psd: need at least two bins");
  const double df = psd.x[1] - psd.x[0];
  double sum = 0.0;
  for (std::size_t k = 0; k < psd.x.size(); ++k) {
    if (psd.x[k] >= f_lo && psd.x[k] <= f_hi) sum += psd.y[k];
  }
  return sum * df;
}

MeasurementReport input_referred(const MeasurementReport& psd, const ChannelConfig& cfg) {
  MeasurementReport r;
  r.kind = ReportKind::Psd;
  r.metadata = psd.metadata;
  r.metadata["referred"] = "input";
  for (std::size_t k = 0; k < psd.x.size(); ++k) {
    if (psd.x[k] <= 0.0) continue;
    const double g = std::norm(analytic_response(cfg, psd.x[k]));
    if (g <= 0.0) continue;
    r.x.push_back(psd.x[k]);
    r.y.push_back(psd.y[k] / g);
  }
  return r;
}

double psd_slope_db_per_decade(const MeasurementReport& psd, double f_lo, double f_hi) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < psd.x.size(); ++k) {
    if (psd.x[k] >= f_lo && psd.x[k] <= f_hi && psd.y[k] > 0.0) {
      lx.push_back(std::log10(psd.x[k]));
      ly.push_back(10.0 * std::log10(psd.y[k]));
    }
  }
  const auto fit = fit_line(lx, ly);
  if (!fit) throw std::invalid_argument("psd_slope: fewer than two bins in range");
  return fit->slope;
}

double sndr(const SampledSignal& y, double f0, const SndrOptions& opts) {
  y.validate();
  if (!(f0 > 0.0) || y.duration() * f0 < 20.0) {
    throw std::invalid_argument("sndr: record must span at least 20 periods of f0");
  }
  const SineFit fit = fit_sine(y.samples, f0, y.fs);
  const double w = 2.0 * kPi * f0 / y.fs;
  std::vector<double> residual(y.size());
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double t = w * static_cast<double>(n);
    residual[n] = y.samples[n] - (fit.a * std::cos(t) + fit.b * std::sin(t) + fit.dc);
  }

  // Rectangular window: the bin powers sum to the residual's mean square.
  detail::RealFft fft(residual.size());
  const auto& bins = fft.transform(residual);
  const double n = static_cast<double>(residual.size());
  const double hi = opts.band_hi > 0.0 ? opts.band_hi : y.fs / 2.0;
  const auto k0 = static_cast<long long>(std::llround(f0 * n / y.fs));
  double noise = 0.0;
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double f = static_cast<double>(k) * y.fs / n;
    if (f < opts.band_lo || f > hi) continue;
    if (std::llabs(static_cast<long long>(k) - k0) <= 1) continue;
    const bool edge = k == 0 || (residual.size() % 2 == 0 && k == bins.size() - 1);
    noise += std::norm(bins[k]) * (edge ? 1.0 : 2.0) / (n * n);
  }
  const double signal = 0.5 * (fit.a * fit.a + fit.b * fit.b);
  if (noise <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

MeasurementReport sndr_vs_amplitude(const ChannelConfig& cfg, std::span<const double> amplitudes,
                                    double tone_hz, std::uint64_t seed,
                                    const SndrSweepOptions& opts) {
  require_increasing(amplitudes, "sndr_vs_amplitude");
  if (!(amplitudes.front() > 0.0)) {
    throw std::invalid_argument("sndr_vs_amplitude: amplitudes must be positive");
  }
  const auto n_settle = static_cast<std::size_t>(std::ceil(opts.settle_s * opts.fs));
  const auto n_meas = static_cast<std::size_t>(std::ceil(opts.duration_s * opts.fs));
  MeasurementReport r;
  r.kind = ReportKind::SndrCurve;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    PipelineState st = make_pipeline_state(cfg, opts.fs, derive_seed(seed, i));
    const SampledSignal out =
        process_block(cfg, st, tone(amplitudes[i], tone_hz, opts.fs, n_settle + n_meas));
    r.x.push_back(20.0 * std::log10(amplitudes[i]));
    r.y.push_back(sndr(out.slice(n_settle, out.size()), tone_hz, opts.band));
  }
  r.metadata["config_hash"] = fmt::format("{:016x}", config_hash(cfg));
  r.metadata["seed"] = fmt::format("{}", seed);
  r.metadata["tone_hz"] = fmt::format("{}", tone_hz);
  return r;
}

double configured_dynamic_range_db(const ChannelConfig& cfg, double fs, const SndrOptions& band) {
  const double hi = band.band_hi > 0.0 ? band.band_hi : fs / 2.0;
  const double lo = band.band_lo;
  if (!(hi > lo) || !(lo > 0.0)) throw std::invalid_argument("dynamic range: bad band");
  // Trapezoid on a log grid: integrand S(f) |H(f)|^2 f d(ln f).
  const std::size_t points = 20000;
  const double step = std::log(hi / lo) / static_cast<double>(points);
  const double d2 = cfg.noise.white_density * cfg.noise.white_density;
  double power = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i <= points; ++i) {
    const double f = lo * std::exp(step * static_cast<double>(i));
    const double density = d2 * (1.0 + cfg.noise.flicker_corner_hz / f);
    const double v = density * std::norm(analytic_response(cfg, f)) * f;
    if (i > 0) power += 0.5 * (prev + v) * step;
    prev = v;
  }
  return 20.0 * std::log10(cfg.v_sat / std::sqrt(2.0) / std::sqrt(power));
}

std::optional<LinearFit> fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) return std::nullopt;
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

RateCurve rate_vs_amplitude(const ChannelConfig& cfg, std::span<const double> amplitudes,
                            double tone_hz, const RateOptions& opts) {
  require_increasing(amplitudes, "rate_vs_amplitude");
  if (tone_hz < 0.0) throw std::invalid_argument("rate_vs_amplitude: negative tone frequency");
  if (!(opts.duration_s > 0.0)) throw std::invalid_argument("rate_vs_amplitude: bad duration");

  RateCurve out;
  const double v_peak = std::max(std::abs(amplitudes.front()), std::abs(amplitudes.back()));
  double gain = 1.0;
  if (opts.through_pipeline) gain = std::abs(analytic_response(cfg, std::max(tone_hz, 1e-3)));
  out.fs = opts.fs > 0.0
               ? opts.fs
               : std::max(48000.0, std::ceil(min_pfm_sample_rate(cfg.pfm, gain * v_peak) / 1000.0) * 1000.0);
  if (tone_hz > 0.0 && !(tone_hz < out.fs / 2.0)) {
    throw std::invalid_argument("rate_vs_amplitude: tone above Nyquist");
  }

  // Whole tone periods so every amplitude sees the same stimulus shape.
  double duration = opts.duration_s;
  if (tone_hz > 0.0) duration = std::ceil(duration * tone_hz) / tone_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration * out.fs));

  MeasurementReport& r = out.report;
  r.kind = ReportKind::RateCurve;
  for (double a : amplitudes) {
    SampledSignal x = tone(a, tone_hz, out.fs, n);
    if (opts.through_pipeline) {
      ChannelConfig quiet = cfg;
      quiet.noise.enabled = false;
      PipelineState st = make_pipeline_state(quiet, out.fs, 0);
      x = process_block(quiet, st, x);
    }
    LifState lif;
    const PfmResult res = pfm_encode(x, cfg.pfm, lif, cfg.channel);
    double rate = 0.0;
    const auto& ev = res.events;
    if (tone_hz == 0.0 && ev.size() >= 2) {
      rate = static_cast<double>(ev.size() - 1) /
             (static_cast<double>(ev.back().t_ns - ev.front().t_ns) * 1e-9);
    } else if (tone_hz > 0.0) {
      rate = static_cast<double>(ev.size()) / x.duration();
    }
    r.x.push_back(a);
    r.y.push_back(rate);
  }

  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    if (r.y[i] > 0.0) {
      fx.push_back(r.x[i]);
      fy.push_back(r.y[i]);
    }
  }
  out.fit = fit_line(fx, fy);
  r.metadata["config_hash"] = fmt::format("{:016x}", config_hash(cfg));
  r.metadata["tone_hz"] = fmt::format("{}", tone_hz);
  r.metadata["fs"] = fmt::format("{}", out.fs);
  if (out.fit) {
    r.metadata["fit_slope"] = fmt::format("{}", out.fit->slope);
    r.metadata["fit_intercept"] = fmt::format("{}", out.fit->intercept);
    r.metadata["fit_r2"] = fmt::format("{}", out.fit->r2);
  } else {
    r.metadata["fit"] = "undefined";
  }
  return out;
}

}  // namespace afe
