// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "afe/aer.hpp"
#include "afe/decode.hpp"
#include "afe/encoders.hpp"
#include "afe/io.hpp"
#include "afe/measure.hpp"
#include "afe/pipeline.hpp"
#include "oracles.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

using namespace afe;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (detail.size() < 400) detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

Outcome filter_tuning() {
  Outcome o;
  const auto start = Clock::now();
  const auto bank = octave_bank(100.0, 11);
  double worst_f = 0.0, worst_q = 0.0;
  for (const auto& c : bank) {
    const double c1 = c.bpf.c_base * (c.bpf.c1_code.value + 1) / 256.0;
    const double c2 = c.bpf.c_base * (c.bpf.c2_code.value + 1) / 256.0;
    const double f0 = std::sqrt(c.bpf.gm1 * c.bpf.gm2 / (c1 * c2)) / (2.0 * oracle::kPi);
    const double q = std::sqrt(c.bpf.gm2 * c2 / (c.bpf.gm1 * c1));
    // ratio 1.001 between points
    const auto n = static_cast<std::size_t>(std::ceil(std::log(2.25) / std::log(1.001))) + 1;
    const auto sweep = frequency_sweep(c, log_space(f0 / 1.5, f0 * 1.5, n));
    const ResponseMetrics m = response_metrics(sweep);
    const double ferr = std::abs(m.peak_hz / f0 - 1.0);
    const auto sq = m.section_q();
    const double qerr = sq ? std::abs(*sq / q - 1.0) : 1.0;
    worst_f = std::max(worst_f, ferr);
    worst_q = std::max(worst_q, qerr);
    o.require(ferr <= 0.02, fmt::format("ch{} peak {:.6g} Hz vs {:.6g}", c.channel, m.peak_hz, f0));
    o.require(qerr <= 0.05, fmt::format("ch{} Q {:.4g} vs {:.4g}", c.channel, sq.value_or(0.0), q));
  }
  const double t = seconds_since(start);
  o.require(t < 60.0, fmt::format("runtime {:.1f} s", t));
  o.detail = fmt::format("11 channels, worst peak error {:.3f}% (<= 2%), worst Q error {:.3f}% (<= 5%), {:.1f} s (< 60 s){}",
                         100 * worst_f, 100 * worst_q, t, o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome gain_ladder() {
  Outcome o;
  for (const char* stage : {"lna", "pga"}) {
    std::vector<double> measured;
    for (int k = 0; k <= GainCode::kMax; ++k) {
      ChannelConfig c;
      c.passthrough = true;
      (std::string(stage) == "lna" ? c.lna_gain : c.pga_gain) = GainCode{k};
      measured.push_back(oracle::db(measure_gain(c, 1000.0)));
      o.require(std::abs(gain_db_from_code(GainCode{k}) - 1.6 * k) < 1e-12, fmt::format("{} code {}", stage, k));
    }
    o.require(measured.size() == 16, "16 codes");
    for (std::size_t k = 1; k < measured.size(); ++k) {
      o.require(measured[k] > measured[k - 1], fmt::format("{} not monotone at {}", stage, k));
    }
    o.require(std::abs(measured.front()) < 1e-9, fmt::format("{} code 0 gives {} dB", stage, measured.front()));
    o.require(std::abs(measured.back() - 24.0) < 1e-9, fmt::format("{} code 15 gives {} dB", stage, measured.back()));
  }
  o.require(gain_db_from_code(GainCode{0}) == 0.0 && gain_db_from_code(GainCode{15}) == 24.0, "exact endpoints");
  o.require(gain_from_code(GainCode{0}) == 1.0, "unity at code 0");

  BankOptions same;
  same.octave = false;
  const auto bank = octave_bank(1000.0, 16, same);
  const auto grid = log_space(100.0, 10000.0, 41);
  std::vector<MeasurementReport> curves;
  for (const auto& c : bank) curves.push_back(frequency_sweep(c, grid));
  double spread = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double lo = 1e300, hi = -1e300;
    for (const auto& r : curves) {
      lo = std::min(lo, r.y[i]);
      hi = std::max(hi, r.y[i]);
    }
    spread = std::max(spread, hi - lo);
  }
  o.require(curves.size() == 16 && spread <= 0.1, fmt::format("identical curves spread {} dB", spread));
  o.detail = fmt::format("LNA and PGA: 16 monotone codes, 0..24 dB exact; 16 identical channels within {:.2g} dB (<= 0.1 dB){}",
                         spread, o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome adm_round_trip() {
  Outcome o;
  const auto start = Clock::now();
  AdmConfig cfg;
  cfg.delta_up = cfg.delta_dn = 10e-3;
  cfg.hysteresis = 1e-3;
  cfg.threshold_sigma = 0.0;
  const double fs = 48000.0;
  const auto x = oracle::signal(oracle::sine(48000, fs, 100.0, 0.2), fs);
  AdmState st = make_adm_state(cfg, 0);
  const auto ev = adm_encode(x, cfg, st, 0);
  o.require(!ev.empty(), "no events");
  const AdmDecodeParams p{cfg.delta_up, cfg.delta_dn, cfg.v_ref_init, 0.0};
  const auto y = adm_reconstruct(ev, p, DecodeGrid{fs, 0, x.size()});
  double worst = 0.0;
  for (std::size_t n = 0; n < x.size() && !ev.empty(); ++n) {
    if (x.time_ns(n) < ev.front().t_ns) continue;
    worst = std::max(worst, std::abs(y.samples[n] - x.samples[n]));
  }
  o.require(worst <= cfg.delta_up + cfg.hysteresis, fmt::format("max error {} V", worst));
  const auto ups = std::count_if(ev.begin(), ev.end(), [](const Event& e) { return e.polarity == Polarity::Up; });
  const auto dns = static_cast<std::int64_t>(ev.size()) - ups;
  const double identity = cfg.v_ref_init + (cfg.delta_up * static_cast<double>(ups) - cfg.delta_dn * static_cast<double>(dns));
  o.require(st.v_ref == identity, "encoder reference differs from the count identity");
  o.require(y.samples.back() == identity, "reconstruction differs from the count identity");
  const double t = seconds_since(start);
  o.require(t < 5.0, fmt::format("runtime {:.2f} s", t));
  o.detail = fmt::format("{} UP / {} DN, max error {:.4g} mV (<= 11 mV), identity exact, {:.3f} s (< 5 s){}", ups, dns,
                         worst * 1e3, t, o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome adm_equivalence() {
  Outcome o;
  std::mt19937_64 rng(20261014);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const double fs = 10000.0;
  std::size_t total = 0, mismatched = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    AdmConfig cfg;
    cfg.threshold_sigma = 0.0;
    cfg.delta_up = 2e-3 + 18e-3 * u(rng);
    cfg.delta_dn = 2e-3 + 18e-3 * u(rng);
    cfg.hysteresis = 0.9 * std::min(cfg.delta_up, cfg.delta_dn) * u(rng);
    cfg.v_ref_init = 0.05 * g(rng);
    std::vector<double> v(512);
    const double step = 1e-3 + 30e-3 * u(rng);
    const double amp = 0.3 * u(rng), f = 5.0 + 2000.0 * u(rng);
    double walk = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) {
      walk += step * g(rng);
      v[n] = (trial % 2 ? walk : 0.0) + amp * std::sin(2.0 * oracle::kPi * f * n / fs) + 1e-3 * g(rng);
    }
    const auto x = oracle::signal(v, fs);
    AdmState st = make_adm_state(cfg, 0);
    const auto got = adm_encode(x, cfg, st, 3);
    std::vector<Event> want;
    for (const auto& e : oracle::level_crossings(v, cfg.delta_up, cfg.delta_dn, cfg.hysteresis, cfg.v_ref_init)) {
      want.push_back({x.time_ns(e.sample), Source::Adm, 3, e.up ? Polarity::Up : Polarity::Dn});
    }
    total += want.size();
    if (got != want) ++mismatched;
  }
  o.require(mismatched == 0, fmt::format("{} signals differ", mismatched));
  o.detail = fmt::format("1000 random signals, {} oracle events, {} mismatches (== 0){}", total, mismatched,
                         o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome pfm_linearity() {
  Outcome o;
  const auto amps = lin_space(0.05, 0.4, 8);
  double worst_isi = 0.0;
  double r2_ideal = 0.0, r2_tone = 0.0;
  for (bool ideal : {true, false}) {
    ChannelConfig c;
    c.mode = Mode::Pfm;
    if (ideal) {
      c.pfm.i_leak = 0.0;
      c.pfm.t_refr = 0.0;
    }
    RateOptions opts;
    opts.duration_s = 1.0;
    const auto rc = rate_vs_amplitude(c, amps, 0.0, opts);
    for (std::size_t i = 0; i < amps.size(); ++i) {
      const double isi = oracle::lif_period(c.pfm.gm_amp * amps[i], c.pfm.i_leak, c.pfm.c_mem,
                                            c.pfm.v_th - c.pfm.v_reset, c.pfm.t_refr);
      const double err = std::abs(1.0 / rc.report.y[i] - isi) * rc.fs;
      worst_isi = std::max(worst_isi, err);
      o.require(err <= 2.0, fmt::format("{} amplitude {} V off by {:.3g} samples", ideal ? "ideal" : "default", amps[i], err));
    }
    if (ideal) {
      r2_ideal = rc.fit ? rc.fit->r2 : 0.0;
      o.require(r2_ideal >= 0.999, fmt::format("ideal DC R^2 {}", r2_ideal));
    }
  }
  ChannelConfig c;
  c.mode = Mode::Pfm;
  const auto tone = rate_vs_amplitude(c, amps, 100.0);
  r2_tone = tone.fit ? tone.fit->r2 : 0.0;
  o.require(r2_tone >= 0.98, fmt::format("default 100 Hz R^2 {}", r2_tone));
  o.detail = fmt::format("DC ISI error <= {:.3g} samples (<= 2), R^2 {:.6f} ideal DC (>= 0.999), {:.4f} defaults at 100 Hz (>= 0.98){}",
                         worst_isi, r2_ideal, r2_tone, o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome aer_properties() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::int64_t> gap(0, 800);
  std::vector<std::vector<Event>> streams(kNumChannels);
  for (int ch = 0; ch < kNumChannels; ++ch) {
    std::int64_t t = 0;
    for (int i = 0; i < 6250; ++i) {
      t += gap(rng);
      streams[static_cast<std::size_t>(ch)].push_back({t, Source::Adm, ch, rng() & 1 ? Polarity::Up : Polarity::Dn});
    }
  }
  const auto merged = arbitrate(streams);
  std::uniform_int_distribution<std::int64_t> base(1, 40);
  const HandshakeDelays d{base(rng), base(rng), base(rng), base(rng), 25, rng()};
  const auto r = handshake_run(merged, d);

  o.require(merged.size() == 100000, "merged size");
  o.require(r.delivered.size() == merged.size(), "delivery count");
  std::map<std::tuple<std::int64_t, int, int>, int> sent, got;
  for (const auto& e : merged) ++sent[{e.t_ns, e.channel, static_cast<int>(e.polarity)}];
  for (const auto& del : r.delivered) ++got[{del.event.t_ns, del.event.channel, static_cast<int>(del.event.polarity)}];
  o.require(sent == got, "delivered multiset differs");

  std::vector<std::int64_t> last(kNumChannels, -1);
  std::size_t late = 0, reordered = 0;
  for (std::size_t i = 0; i < r.delivered.size(); ++i) {
    const auto& del = r.delivered[i];
    if (del.delivered_ns < del.event.t_ns + del.delay_sum_ns) ++late;
    auto& l = last[static_cast<std::size_t>(del.event.channel)];
    if (del.event.t_ns < l) ++reordered;
    l = del.event.t_ns;
    o.require(decode_address(del.word, Source::Adm) == std::pair{del.event.channel, del.event.polarity}, "address");
  }
  o.require(late == 0, fmt::format("{} early deliveries", late));
  o.require(reordered == 0, fmt::format("{} per-channel reorders", reordered));

  std::size_t illegal = 0;
  Phase p = Phase::Idle;
  std::int64_t t = std::numeric_limits<std::int64_t>::min();
  o.require(r.trace.size() == 4 * merged.size(), "trace length");
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    const auto& tr = r.trace[k];
    if (tr.from != p || tr.to != next_phase(p) || tr.t_ns < t || tr.index != k / 4) ++illegal;
    p = tr.to;
    t = tr.t_ns;
  }
  o.require(illegal == 0 && p == Phase::Idle, fmt::format("{} illegal transitions", illegal));
  const double secs = seconds_since(start);
  o.require(secs < 10.0, fmt::format("runtime {:.2f} s", secs));
  o.detail = fmt::format("{} events, delays {}/{}/{}/{} ns + jitter {} ns, all delivered once and in order, {} legal transitions, {:.2f} s (< 10 s){}",
                         merged.size(), d.req_rise_ns, d.ack_rise_ns, d.req_fall_ns, d.ack_fall_ns, d.jitter_ns,
                         r.trace.size(), secs, o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome noise_calibration() {
  Outcome o;
  ChannelConfig c;
  c.passthrough = true;
  c.lna_gain = GainCode{15};
  c.noise = NoiseModel::calibrated(1.4e-6, 1.0, 1000.0, 1000.0);
  c.noise.enabled = true;
  const double fs = 8000.0;
  PipelineState st = make_pipeline_state(c, fs, 2026);
  const auto y = process_block(c, st, oracle::signal(std::vector<double>(480000, 0.0), fs));
  const auto psd = input_referred(welch_psd(y, 16384, 0.5), c);
  const double rms = std::sqrt(integrate_psd(psd, 1.0, 1000.0));
  const double err = rms / 1.4e-6 - 1.0;
  const double slope = psd_slope_db_per_decade(psd, 1.0, 30.0);
  o.require(std::abs(err) <= 0.10, fmt::format("rms {} V", rms));
  o.require(std::abs(slope + 10.0) <= 1.5, fmt::format("slope {} dB/dec", slope));
  o.detail = fmt::format("input-referred {:.4g} uVrms in 1 Hz..1 kHz ({:+.2f}%, within 10%), slope {:.2f} dB/dec over 1..30 Hz (-10 +/- 1.5){}",
                         rms * 1e6, 100 * err, slope, o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome sndr_sanity() {
  Outcome o;
  const double fs = 48000.0, f = 997.0;
  auto v = oracle::sine(48000, fs, f, 1.0);
  const double q = 2.0 / 256.0;
  for (auto& s : v) s = std::clamp((std::floor(s / q) + 0.5) * q, -1.0 + q / 2, 1.0 - q / 2);
  const double quantised = sndr(oracle::signal(v, fs), f);
  o.require(std::abs(quantised - 49.9) <= 0.5, fmt::format("8-bit SNDR {} dB", quantised));

  BankOptions b;
  b.base.saturate = true;
  b.base.noise = NoiseModel{1e-6, 0.0, true};
  const ChannelConfig c = octave_bank(1000.0, 1, b).front();
  SndrSweepOptions opts;
  const double dr = configured_dynamic_range_db(c, opts.fs, opts.band);
  const double edge = oracle::db(c.v_sat);  // clip onset with unity passband gain
  std::vector<double> dbv;
  for (double d = edge - 60.0; d < edge - 3.0; d += 6.0) dbv.push_back(d);
  for (double d = edge - 3.0; d <= edge + 3.0 + 1e-9; d += 0.1) dbv.push_back(d);
  std::vector<double> amps;
  for (double d : dbv) amps.push_back(std::pow(10.0, d / 20.0));
  const auto r = sndr_vs_amplitude(c, amps, 1000.0, 7, opts);
  const auto k = static_cast<std::size_t>(std::max_element(r.y.begin(), r.y.end()) - r.y.begin());
  const double peak = r.y[k];
  o.require(std::abs(peak - dr) <= 1.0, fmt::format("peak {} dB vs configured {} dB", peak, dr));
  o.require(k > 0 && k + 1 < r.y.size(), "peak at sweep boundary");
  o.detail = fmt::format("8-bit sine {:.2f} dB (49.9 +/- 0.5); saturating sweep peaks at {:.2f} dB at {:.2f} dBV vs configured DR {:.2f} dB (+/- 1){}",
                         quantised, peak, r.x[k], dr, o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / fmt::format("afesim_accept_{}", Clock::now().time_since_epoch().count());
  fs::create_directories(dir);
  std::ofstream(dir / "cfg.ini") << "[global]\nfs = 192000\naer.jitter_ns = 7\n"
                                    "[channel.0]\nnoise.enabled = true\n"
                                    "[channel.4]\nmode = PFM\nlna_gain = 6\nnoise.enabled = true\n"
                                    "[channel.9]\nadm.threshold_sigma = 0.002\n";
  {
    std::ofstream in(dir / "in.csv");
    write_signal_csv(in, oracle::signal(oracle::sine(24000, 48000.0, 100.0, 0.2), 48000.0));
  }
  const std::string exe = AFESIM_PATH;
  const std::string d = dir.string();
  const std::vector<std::pair<std::string, std::string>> runs{
      {"encode", fmt::format("encode --config {0}/cfg.ini --input {0}/in.csv --seed 5 --stamp delivery", d)},
      {"decode", fmt::format("decode --input {0}/encode.0 --mode adm --channel 0 --smoothing-hz 200", d)},
      {"psd", fmt::format("measure psd --config {0}/cfg.ini --seed 5 --duration 2 --seg-len 4096", d)},
      {"sndr", fmt::format("measure sndr --config {0}/cfg.ini --seed 5 --amps-dbv -40:0:3", d)},
      {"rate", fmt::format("measure rate --amps 0.1:0.3:3 --duration 0.5", d)},
  };
  int compared = 0;
  for (const auto& [name, args] : runs) {
    std::string outputs[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / fmt::format("{}.{}", name, k);
      const int rc = std::system(fmt::format("{} {} --output {}", exe, args, out.string()).c_str());
      o.require(rc == 0, fmt::format("{} exited {}", name, rc));
      outputs[k] = slurp(out);
    }
    o.require(!outputs[0].empty() && outputs[0] == outputs[1], fmt::format("{} outputs differ", name));
    ++compared;
  }
  fs::remove_all(dir);
  o.detail = fmt::format("{} CLI commands run twice, outputs byte-identical{}", compared,
                         o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"filter tuning", filter_tuning},     {"gain ladder", gain_ladder},
      {"ADM round trip", adm_round_trip},   {"ADM oracle equivalence", adm_equivalence},
      {"PFM linearity", pfm_linearity},     {"AER properties", aer_properties},
      {"noise calibration", noise_calibration}, {"SNDR harness", sndr_sanity},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = fmt::format("exception: {}", e.what());
    }
    if (!o.pass) ++failed;
    fmt::print("{} {}. {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
