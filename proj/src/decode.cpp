#include "afe/decode.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace afe {

namespace {

void check_stream(std::span<const Event> events, Source expected, std::string_view who) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].source != expected) {
      throw std::invalid_argument(fmt::format("{}: event {} is not {}-source", who, i,
                                              to_string(expected)));
    }
    if (i > 0 && events[i].t_ns < events[i - 1].t_ns) {
      throw std::invalid_argument(fmt::format("{}: event {} out of time order", who, i));
    }
  }
}

std::vector<std::int64_t> grid_times(std::span<const Event> events, const DecodeGrid& grid) {
  if (!(grid.fs > 0.0)) throw std::invalid_argument("decode: output rate must be positive");
  std::size_t n = grid.n_samples;
  const double step_ns = 1e9 / grid.fs;
  if (n == 0) {
    n = 1;
    if (!events.empty() && events.back().t_ns > grid.t0_ns) {
      const double span = static_cast<double>(events.back().t_ns - grid.t0_ns);
      n = static_cast<std::size_t>(std::ceil(span / step_ns)) + 1;
    }
  }
  std::vector<std::int64_t> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k] = grid.t0_ns + std::llround(static_cast<double>(k) * step_ns);
  }
  return t;
}

SampledSignal make_output(const DecodeGrid& grid, std::size_t n) {
  SampledSignal s;
  s.fs = grid.fs;
  s.t0 = static_cast<double>(grid.t0_ns) * 1e-9;
  s.samples.assign(n, 0.0);
  return s;
}

}  // namespace

SampledSignal adm_reconstruct(std::span<const Event> events, const AdmDecodeParams& p,
                              const DecodeGrid& grid) {
  check_stream(events, Source::Adm, "adm_reconstruct");
  const auto times = grid_times(events, grid);
  SampledSignal out = make_output(grid, times.size());

  // Integer step counts keep the final value exact.
  std::int64_t ups = 0, dns = 0;
  std::size_t e = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    while (e < events.size() && events[e].t_ns <= times[k]) {
      (events[e].polarity == Polarity::Up ? ups : dns) += 1;
      ++e;
    }
    out.samples[k] = p.v0 + (p.delta_up * static_cast<double>(ups) -
                             p.delta_dn * static_cast<double>(dns));
  }

  if (p.smoothing_hz > 0.0) {
    const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * p.smoothing_hz / grid.fs);
    double y = p.v0;
    for (double& v : out.samples) {
      y += alpha * (v - y);
      v = y;
    }
  }
  return out;
}

SampledSignal pfm_rate_decode(std::span<const Event> events, double window_s,
                              const DecodeGrid& grid) {
  check_stream(events, Source::Pfm, "pfm_rate_decode");
  if (!(window_s > 0.0)) throw std::invalid_argument("pfm_rate_decode: window must be positive");
  const auto times = grid_times(events, grid);
  SampledSignal out = make_output(grid, times.size());
  const auto window_ns = static_cast<std::int64_t>(std::llround(window_s * 1e9));

  std::size_t head = 0, tail = 0;  // events in (t - window, t] are [tail, head)
  for (std::size_t k = 0; k < times.size(); ++k) {
    while (head < events.size() && events[head].t_ns <= times[k]) ++head;
    while (tail < head && events[tail].t_ns <= times[k] - window_ns) ++tail;
    out.samples[k] = static_cast<double>(head - tail) / window_s;
  }
  return out;
}

}  // namespace afe
