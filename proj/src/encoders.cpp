#include "afe/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace afe {

AdmState make_adm_state(const AdmConfig& cfg, std::uint64_t seed) {
  AdmState st;
  st.v_ref = cfg.v_ref_init;
  st.v_origin = cfg.v_ref_init;
  st.realized_delta_up = cfg.delta_up;
  st.realized_delta_dn = cfg.delta_dn;
  if (cfg.threshold_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> offset(0.0, cfg.threshold_sigma);
    auto draw = [&](double nominal) {
      for (;;) {
        const double d = nominal + offset(rng);
        if (d > cfg.hysteresis) return d;
      }
    };
    st.realized_delta_up = draw(cfg.delta_up);
    st.realized_delta_dn = draw(cfg.delta_dn);
  }
  return st;
}

std::vector<Event> adm_encode(const SampledSignal& x, const AdmConfig& cfg, AdmState& st,
                              int channel) {
  std::vector<Event> events;
  const double h = cfg.hysteresis;
  const double up = st.realized_delta_up;
  const double dn = st.realized_delta_dn;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double v = x.samples[n];
    if (st.armed_up && v - st.v_ref >= up) {
      events.push_back({x.time_ns(n), Source::Adm, channel, Polarity::Up});
      ++st.ups;
      st.v_ref = st.v_origin + (up * static_cast<double>(st.ups) - dn * static_cast<double>(st.dns));
      st.armed_up = false;
    } else if (st.armed_dn && st.v_ref - v >= dn) {
      events.push_back({x.time_ns(n), Source::Adm, channel, Polarity::Dn});
      ++st.dns;
      st.v_ref = st.v_origin + (up * static_cast<double>(st.ups) - dn * static_cast<double>(st.dns));
      st.armed_dn = false;
    }
    if (!st.armed_up && v - st.v_ref <= up - h) st.armed_up = true;
    if (!st.armed_dn && st.v_ref - v <= dn - h) st.armed_dn = true;
  }
  return events;
}

PfmResult pfm_encode(const SampledSignal& x, const PfmConfig& cfg, LifState& st, int channel) {
  PfmResult out;
  out.membrane.fs = x.fs;
  out.membrane.t0 = x.t0;
  out.membrane.samples.resize(x.size());
  const double dt = 1.0 / x.fs;
  const auto refr_ns = static_cast<std::int64_t>(std::llround(cfg.t_refr * 1e9));

  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::int64_t t = x.time_ns(n);
    if (t < st.refr_until_ns) {
      st.v_mem = cfg.v_reset;
    } else {
      const double i_in = cfg.gm_amp * std::max(x.samples[n], 0.0);
      st.v_mem = std::max(0.0, st.v_mem + dt * (i_in - cfg.i_leak) / cfg.c_mem);
      if (st.v_mem >= cfg.v_th) {
        out.events.push_back({t, Source::Pfm, channel, Polarity::Na});
        st.v_mem = cfg.v_reset;
        st.refr_until_ns = t + refr_ns;
      }
    }
    out.membrane.samples[n] = st.v_mem;
  }
  return out;
}

std::optional<double> lif_isi(double i_const, const PfmConfig& cfg) {
  if (!(i_const > cfg.i_leak)) return std::nullopt;
  return cfg.t_refr + cfg.c_mem * (cfg.v_th - cfg.v_reset) / (i_const - cfg.i_leak);
}

}  // namespace afe
