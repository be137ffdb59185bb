#include "afe/cli.hpp"

#include "afe/aer.hpp"
#include "afe/decode.hpp"
#include "afe/encoders.hpp"
#include "afe/io.hpp"
#include "afe/measure.hpp"
#include "afe/pipeline.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <future>
#include <optional>
#include <ostream>
#include <sstream>

namespace afe::cli {

namespace {

// Carries an exit code and a one-line reason up to run().
struct Failure {
  int code;
  std::string category;
  std::string message;
};

[[noreturn]] void fail(int code, std::string category, std::string message) {
  throw Failure{code, std::move(category), std::move(message)};
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

SystemConfig load_config(const std::string& path, std::ostream& err) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const InputError& e) {
    fail(kConfig, "config", e.what());
  }
  ConfigParse parsed = parse_config(text);
  if (!parsed.errors.empty()) {
    // All but the last violation are printed here; the last travels with the failure.
    for (std::size_t i = 0; i + 1 < parsed.errors.size(); ++i) {
      err << "error[config]: " << parsed.errors[i].field << ": " << parsed.errors[i].message
          << '\n';
    }
    const auto& last = parsed.errors.back();
    fail(kConfig, "config", fmt::format("{}: {}", last.field, last.message));
  }
  return parsed.config;
}

ChannelConfig pick_channel(const std::optional<std::string>& config_path, int channel,
                           std::ostream& err) {
  if (!config_path) {
    ChannelConfig c;
    c.channel = channel;
    const auto v = validate_config(c);
    if (!v.empty()) fail(kConfig, "usage", fmt::format("--channel: {}", v.front().message));
    return c;
  }
  const SystemConfig sys = load_config(*config_path, err);
  const ChannelConfig* c = sys.find(channel);
  if (!c) fail(kConfig, "config", fmt::format("channel.{}: section not present", channel));
  return *c;
}

// Writes through a buffer so a failed run leaves no partial output file.
void emit(const std::string& output, std::ostream& out, const std::string& body) {
  if (output.empty() || output == "-") {
    out << body;
    return;
  }
  std::ofstream f(output, std::ios::binary);
  if (!f) fail(kInput, "input", fmt::format("cannot write '{}'", output));
  f << body;
}

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
  // lo:hi:n, linearly spaced and inclusive
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) fail(kConfig, "usage", fmt::format("{}: expected lo:hi:n", flag));
  try {
    std::size_t used = 0;
    const double lo = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("lo");
    const double hi = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("hi");
    const int n = std::stoi(parts[2], &used);
    if (used != parts[2].size() || n < 1) throw std::invalid_argument("n");
    if (n > 1 && !(hi > lo)) throw std::invalid_argument("range");
    return lin_space(lo, hi, static_cast<std::size_t>(n));
  } catch (const std::exception&) {
    fail(kConfig, "usage", fmt::format("{}: expected lo:hi:n with lo < hi and n >= 1", flag));
  }
}

// ---------------------------------------------------------------- encode

struct EncodeArgs {
  std::string config;
  std::string input;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::string stamp = "event";
  int input_channel = 0;
};

int cmd_encode(const EncodeArgs& a, std::ostream& out, std::ostream& err) {
  SystemConfig sys = load_config(a.config, err);
  if (sys.channels.empty()) fail(kConfig, "config", "no [channel.N] sections");
  if (a.mode) {
    Mode m;
    try {
      m = mode_from_string(lower(*a.mode) == "adm" ? "ADM" : lower(*a.mode) == "pfm" ? "PFM" : *a.mode);
    } catch (const std::invalid_argument&) {
      fail(kConfig, "usage", fmt::format("--mode: expected adm or pfm, got '{}'", *a.mode));
    }
    for (auto& c : sys.channels) c.mode = m;
  }
  if (a.stamp != "event" && a.stamp != "delivery") {
    fail(kConfig, "usage", "--stamp: expected event or delivery");
  }

  bool needs_seed = sys.global.aer.jitter_ns > 0;
  for (const auto& c : sys.channels) {
    needs_seed |= c.noise.enabled;
    needs_seed |= c.mode == Mode::Adm && c.adm.threshold_sigma > 0.0;
  }
  if (needs_seed && !a.seed) {
    fail(kConfig, "config", "--seed is required when noise, threshold mismatch or AER jitter is enabled");
  }
  const std::uint64_t seed = a.seed.value_or(0);

  SampledSignal x;
  try {
    x = read_signal(a.input, a.input_channel, sys.global.input_scale);
    x.validate();
  } catch (const InputError& e) {
    fail(kInput, "input", e.what());
  } catch (const std::invalid_argument& e) {
    fail(kInput, "input", e.what());
  }

  const double fs = sys.global.fs > 0.0 ? sys.global.fs : default_sample_rate(sys.channels);
  for (const auto& c : sys.channels) {
    if (!c.passthrough && !(bpf_params(c.bpf).f0 < fs / 2.0)) {
      fail(kConfig, "config",
           fmt::format("channel.{}: centre frequency above Nyquist of global.fs", c.channel));
    }
  }
  if (std::abs(x.fs - fs) > 1e-9 * fs) x = resample(x, fs);
  x.fs = fs;

  std::vector<std::vector<Event>> adm(kNumChannels), pfm(kNumChannels);
  for (const auto& c : sys.channels) {
    const auto ch = static_cast<std::uint64_t>(c.channel);
    PipelineState st = make_pipeline_state(c, fs, derive_seed(seed, 2 * ch));
    const SampledSignal y = process_block(c, st, x);
    if (c.mode == Mode::Adm) {
      AdmState enc = make_adm_state(c.adm, derive_seed(seed, 2 * ch + 1));
      adm[ch] = adm_encode(y, c.adm, enc, c.channel);
    } else {
      const double peak = *std::max_element(y.samples.begin(), y.samples.end());
      const auto v = validate_pfm_timestep(c.pfm, fs, peak);
      if (!v.empty()) {
        fail(kConfig, "config", fmt::format("channel.{}.{}: {} (raise global.fs)", c.channel,
                                            v.front().field, v.front().message));
      }
      LifState lif;
      pfm[ch] = pfm_encode(y, c.pfm, lif, c.channel).events;
    }
  }

  // Two independent links, one per encoding path.
  std::vector<Event> events;
  auto run_link = [&](const std::vector<std::vector<Event>>& streams, std::uint64_t tag) {
    const std::vector<Event> merged = arbitrate(streams);
    HandshakeDelays d = sys.global.aer;
    d.seed = derive_seed(seed, tag);
    const HandshakeResult r = handshake_run(merged, d);
    for (const auto& del : r.delivered) {
      Event e = del.event;
      if (a.stamp == "delivery") e.t_ns = del.delivered_ns;
      events.push_back(e);
    }
  };
  run_link(adm, 1000);
  run_link(pfm, 1001);
  std::stable_sort(events.begin(), events.end(), [](const Event& l, const Event& r) {
    if (l.t_ns != r.t_ns) return l.t_ns < r.t_ns;
    if (l.source != r.source) return l.source < r.source;
    return l.channel < r.channel;
  });

  std::ostringstream body;
  write_event_csv(body, events);
  emit(a.output, out, body.str());
  return kOk;
}

// ---------------------------------------------------------------- decode

struct DecodeArgs {
  std::string input;
  std::string output;
  std::string mode;
  std::optional<std::string> config;
  int channel = 0;
  std::optional<double> delta_up, delta_dn, v0;
  double smoothing_hz = 0.0;
  double window_s = 10e-3;
  double fs_out = 48000.0;
  double duration_s = 0.0;
};

int cmd_decode(const DecodeArgs& a, std::ostream& out, std::ostream& err) {
  const std::string mode = lower(a.mode);
  if (mode != "adm" && mode != "pfm") {
    fail(kConfig, "usage", fmt::format("--mode: expected adm or pfm, got '{}'", a.mode));
  }
  if (!(a.fs_out > 0.0)) fail(kConfig, "usage", "--fs-out must be positive");
  if (!(a.duration_s >= 0.0)) fail(kConfig, "usage", "--duration must be >= 0");
  if (mode == "pfm" && !(a.window_s > 0.0)) fail(kConfig, "usage", "--window must be positive");

  AdmDecodeParams p;
  if (a.config) {
    const ChannelConfig c = pick_channel(a.config, a.channel, err);
    p.delta_up = c.adm.delta_up;
    p.delta_dn = c.adm.delta_dn;
    p.v0 = c.adm.v_ref_init;
  }
  if (a.delta_up) p.delta_up = *a.delta_up;
  if (a.delta_dn) p.delta_dn = *a.delta_dn;
  if (a.v0) p.v0 = *a.v0;
  p.smoothing_hz = a.smoothing_hz;

  std::vector<Event> all;
  try {
    all = parse_event_csv(read_file(a.input));
  } catch (const InputError& e) {
    fail(kInput, "input", e.what());
  }
  std::vector<Event> events;
  for (const auto& e : all) {
    if (e.channel == a.channel) events.push_back(e);
  }

  DecodeGrid grid;
  grid.fs = a.fs_out;
  if (a.duration_s > 0.0) {
    grid.n_samples = static_cast<std::size_t>(std::llround(a.duration_s * a.fs_out));
    if (grid.n_samples == 0) grid.n_samples = 1;
  }

  SampledSignal s;
  try {
    s = mode == "adm" ? adm_reconstruct(events, p, grid) : pfm_rate_decode(events, a.window_s, grid);
  } catch (const std::invalid_argument& e) {
    fail(kInput, "input", e.what());
  }
  std::ostringstream body;
  write_signal_csv(body, s);
  emit(a.output, out, body.str());
  return kOk;
}

// ---------------------------------------------------------------- measure

struct MeasureArgs {
  std::optional<std::string> config;
  std::string output;
  int channel = 0;
  std::optional<std::uint64_t> seed;
  // sweep
  std::optional<double> f_min, f_max;
  int points = 61;
  double amplitude = 1e-3;
  // bank
  double f_lo = 100.0;
  int n = 11;
  double q = 2.0;
  bool identical = false;
  int points_per_decade = 24;
  // psd
  double duration_s = 10.0;
  int seg_len = 16384;
  double overlap = 0.5;
  double fs = 0.0;
  bool input_referred_flag = false;
  // sndr / rate
  std::optional<std::string> amps;
  std::optional<std::string> amps_dbv;
  std::optional<double> tone_hz;
  bool through_pipeline = false;
};

void require_seed(const ChannelConfig& c, const MeasureArgs& a) {
  if (c.noise.enabled && !a.seed) fail(kConfig, "config", "--seed is required when noise is enabled");
}

std::string report_text(const MeasurementReport& r) {
  std::ostringstream ss;
  write_report_csv(ss, r);
  return ss.str();
}

int cmd_sweep(const MeasureArgs& a, std::ostream& out, std::ostream& err) {
  const ChannelConfig c = pick_channel(a.config, a.channel, err);
  const double f0 = c.passthrough ? 1000.0 : bpf_params(c.bpf).f0;
  const double lo = a.f_min.value_or(f0 / 10.0);
  const double hi = a.f_max.value_or(f0 * 10.0);
  if (!(lo > 0.0) || !(hi > lo) || a.points < 2) {
    fail(kConfig, "usage", "sweep: need 0 < --f-min < --f-max and --points >= 2");
  }
  SweepOptions opts;
  opts.amplitude = a.amplitude;
  opts.fs = a.fs;
  MeasurementReport r;
  try {
    r = frequency_sweep(c, log_space(lo, hi, static_cast<std::size_t>(a.points)), opts);
  } catch (const std::invalid_argument& e) {
    fail(kConfig, "usage", e.what());
  }
  emit(a.output, out, report_text(r));
  return kOk;
}

int cmd_bank(const MeasureArgs& a, std::ostream& out, std::ostream& err) {
  BankOptions opts;
  opts.q = a.q;
  opts.octave = !a.identical;
  if (a.config) opts.base = pick_channel(a.config, a.channel, err);
  opts.base.noise.enabled = false;
  std::vector<ChannelConfig> bank;
  try {
    bank = octave_bank(a.f_lo, a.n, opts);
  } catch (const std::invalid_argument& e) {
    fail(kConfig, "usage", e.what());
  }
  const double f_top = bpf_params(bank.back().bpf).f0;
  const double lo = a.f_min.value_or(a.f_lo / 4.0);
  const double hi = a.f_max.value_or(f_top * 4.0);
  if (!(lo > 0.0) || !(hi > lo) || a.points_per_decade < 1) {
    fail(kConfig, "usage", "bank: need 0 < --f-min < --f-max and --points-per-decade >= 1");
  }
  const auto points = static_cast<std::size_t>(
      std::max(2.0, std::ceil(std::log10(hi / lo) * a.points_per_decade) + 1));
  const std::vector<double> grid = log_space(lo, hi, points);

  std::vector<std::future<MeasurementReport>> jobs;
  for (const auto& c : bank) {
    jobs.push_back(std::async(std::launch::async, [&grid, c] { return frequency_sweep(c, grid); }));
  }
  std::vector<MeasurementReport> curves;
  for (auto& j : jobs) curves.push_back(j.get());

  std::string body = "# kind=SWEEP\n";
  body += fmt::format("# channels={}\n", bank.size());
  for (std::size_t k = 0; k < bank.size(); ++k) {
    const ResponseMetrics m = response_metrics(curves[k]);
    body += fmt::format("# ch{}.f0_hz={}\n# ch{}.peak_hz={}\n", k, bpf_params(bank[k].bpf).f0, k,
                        m.peak_hz);
  }
  body += "f_hz";
  for (std::size_t k = 0; k < bank.size(); ++k) body += fmt::format(",ch{}_db", k);
  body += '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    body += fmt::format("{}", grid[i]);
    for (const auto& c : curves) body += fmt::format(",{}", c.y[i]);
    body += '\n';
  }
  emit(a.output, out, body);
  return kOk;
}

int cmd_psd(const MeasureArgs& a, std::ostream& out, std::ostream& err) {
  const ChannelConfig c = pick_channel(a.config, a.channel, err);
  require_seed(c, a);
  const double fs = a.fs > 0.0 ? a.fs : default_sample_rate({c});
  if (!(a.duration_s > 0.0)) fail(kConfig, "usage", "--duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(a.duration_s * fs));
  if (a.seg_len < 2 || static_cast<std::size_t>(a.seg_len) > n) {
    fail(kConfig, "usage", "--seg-len must be in 2..number of simulated samples");
  }
  SampledSignal zero;
  zero.fs = fs;
  zero.samples.assign(n, 0.0);
  MeasurementReport r;
  try {
    PipelineState st = make_pipeline_state(c, fs, derive_seed(a.seed.value_or(0), 0));
    r = welch_psd(process_block(c, st, zero), static_cast<std::size_t>(a.seg_len), a.overlap);
  } catch (const std::invalid_argument& e) {
    fail(kConfig, "usage", e.what());
  } catch (const std::domain_error& e) {
    fail(kConfig, "config", e.what());
  }
  if (a.input_referred_flag) r = input_referred(r, c);
  r.metadata["config_hash"] = fmt::format("{:016x}", config_hash(c));
  r.metadata["seed"] = fmt::format("{}", a.seed.value_or(0));
  emit(a.output, out, report_text(r));
  return kOk;
}

int cmd_sndr(const MeasureArgs& a, std::ostream& out, std::ostream& err) {
  const ChannelConfig c = pick_channel(a.config, a.channel, err);
  require_seed(c, a);
  const std::vector<double> dbv = parse_grid(a.amps_dbv.value_or("-60:0:13"), "--amps-dbv");
  std::vector<double> amps;
  for (double d : dbv) amps.push_back(std::pow(10.0, d / 20.0));
  const double tone = a.tone_hz.value_or(c.passthrough ? 1000.0 : bpf_params(c.bpf).f0);
  SndrSweepOptions opts;
  if (a.fs > 0.0) opts.fs = a.fs;
  MeasurementReport r;
  try {
    r = sndr_vs_amplitude(c, amps, tone, a.seed.value_or(0), opts);
  } catch (const std::invalid_argument& e) {
    fail(kConfig, "usage", e.what());
  } catch (const std::domain_error& e) {
    fail(kConfig, "config", e.what());
  }
  r.metadata["dynamic_range_db"] = fmt::format("{}", configured_dynamic_range_db(c, opts.fs));
  emit(a.output, out, report_text(r));
  return kOk;
}

int cmd_rate(const MeasureArgs& a, std::ostream& out, std::ostream& err) {
  const ChannelConfig c = pick_channel(a.config, a.channel, err);
  const std::vector<double> amps = parse_grid(a.amps.value_or("0.05:0.4:8"), "--amps");
  RateOptions opts;
  opts.duration_s = a.duration_s;
  opts.fs = a.fs;
  opts.through_pipeline = a.through_pipeline;
  RateCurve rc;
  try {
    rc = rate_vs_amplitude(c, amps, a.tone_hz.value_or(100.0), opts);
  } catch (const std::invalid_argument& e) {
    fail(kConfig, "usage", e.what());
  } catch (const std::domain_error& e) {
    fail(kConfig, "config", e.what());
  }
  emit(a.output, out, report_text(rc.report));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-based analog front-end simulator", "afesim"};
  app.require_subcommand(1);

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Condition and encode a signal into an event CSV");
  encode->add_option("--config", enc.config, "channel configuration (INI)")->required();
  encode->add_option("--input", enc.input, "WAV or t_s,value CSV")->required();
  encode->add_option("--output", enc.output, "event CSV (default stdout)");
  encode->add_option("--seed", enc.seed, "seed for noise, mismatch and AER jitter");
  encode->add_option("--mode", enc.mode, "override every channel's mode (adm|pfm)");
  encode->add_option("--stamp", enc.stamp, "timestamp written: event|delivery");
  encode->add_option("--input-channel", enc.input_channel, "WAV channel to read");

  DecodeArgs dec;
  auto* decode = app.add_subcommand("decode", "Reconstruct a signal from an event CSV");
  decode->add_option("--input", dec.input, "event CSV")->required();
  decode->add_option("--mode", dec.mode, "adm|pfm")->required();
  decode->add_option("--output", dec.output, "signal CSV (default stdout)");
  decode->add_option("--config", dec.config, "take thresholds and v0 from this configuration");
  decode->add_option("--channel", dec.channel, "channel to decode");
  decode->add_option("--delta-up", dec.delta_up, "ADM up threshold (V)");
  decode->add_option("--delta-dn", dec.delta_dn, "ADM down threshold (V)");
  decode->add_option("--v0", dec.v0, "ADM initial reference (V)");
  decode->add_option("--smoothing-hz", dec.smoothing_hz, "ADM low-pass corner, 0 = off");
  decode->add_option("--window", dec.window_s, "PFM rate window (s)");
  decode->add_option("--fs-out", dec.fs_out, "output sample rate (Hz)");
  decode->add_option("--duration", dec.duration_s, "output length (s), 0 = through last event");

  MeasureArgs ma;
  auto* measure = app.add_subcommand("measure", "Characterisation runs");
  measure->require_subcommand(1);
  auto common = [&](CLI::App* s) {
    s->add_option("--config", ma.config, "channel configuration (INI)");
    s->add_option("--channel", ma.channel, "channel section to use");
    s->add_option("--output", ma.output, "report CSV (default stdout)");
    s->add_option("--fs", ma.fs, "simulation rate (Hz), 0 = automatic");
  };
  auto* sweep = measure->add_subcommand("sweep", "Frequency response of one channel");
  common(sweep);
  sweep->add_option("--f-min", ma.f_min);
  sweep->add_option("--f-max", ma.f_max);
  sweep->add_option("--points", ma.points);
  sweep->add_option("--amplitude", ma.amplitude, "stimulus amplitude (V)");
  auto* bank = measure->add_subcommand("bank", "Octave-spaced filter bank response");
  common(bank);
  bank->add_option("--f-lo", ma.f_lo);
  bank->add_option("--n", ma.n);
  bank->add_option("--q", ma.q);
  bank->add_flag("--identical", ma.identical, "all channels at --f-lo");
  bank->add_option("--f-min", ma.f_min);
  bank->add_option("--f-max", ma.f_max);
  bank->add_option("--points-per-decade", ma.points_per_decade);
  auto* psd = measure->add_subcommand("psd", "Output noise PSD");
  common(psd);
  psd->add_option("--seed", ma.seed);
  psd->add_option("--duration", ma.duration_s);
  psd->add_option("--seg-len", ma.seg_len);
  psd->add_option("--overlap", ma.overlap);
  psd->add_flag("--input-referred", ma.input_referred_flag, "divide by the chain gain");
  auto* sndr_cmd = measure->add_subcommand("sndr", "SNDR versus input amplitude");
  common(sndr_cmd);
  sndr_cmd->add_option("--seed", ma.seed);
  sndr_cmd->add_option("--amps-dbv", ma.amps_dbv, "lo:hi:n input amplitudes in dBV");
  sndr_cmd->add_option("--tone-hz", ma.tone_hz);
  auto* rate = measure->add_subcommand("rate", "PFM spike rate versus amplitude");
  common(rate);
  rate->add_option("--amps", ma.amps, "lo:hi:n amplitudes in V");
  rate->add_option("--tone-hz", ma.tone_hz, "0 for constant levels");
  rate->add_option("--duration", ma.duration_s);
  rate->add_flag("--through-pipeline", ma.through_pipeline);

  try {
    std::vector<const char*> argv{"afesim"};
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ' ');
    err << "error[usage]: " << what << '\n';
    return kConfig;
  }

  try {
    if (*encode) return cmd_encode(enc, out, err);
    if (*decode) return cmd_decode(dec, out, err);
    if (*sweep) return cmd_sweep(ma, out, err);
    if (*bank) return cmd_bank(ma, out, err);
    if (*psd) return cmd_psd(ma, out, err);
    if (*sndr_cmd) return cmd_sndr(ma, out, err);
    if (*rate) {
      if (!rate->count("--duration")) ma.duration_s = 2.0;
      return cmd_rate(ma, out, err);
    }
  } catch (const Failure& f) {
    err << "error[" << f.category << "]: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

}  // namespace afe::cli
