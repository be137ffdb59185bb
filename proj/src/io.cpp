#include "afe/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace afe {

namespace {

std::string_view trim(std::string_view s) {
  const auto issp = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && issp(s.front())) s.remove_prefix(1);
  while (!s.empty() && issp(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t end = line.find(sep, start);
    out.push_back(trim(line.substr(start, end == std::string_view::npos ? end : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

bool parse_bool(std::string_view s, bool& out) {
  s = trim(s);
  if (s == "true" || s == "1") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0") {
    out = false;
    return true;
  }
  return false;
}

// Setter returns an error message, empty on success.
using ChannelSetter = std::function<std::string(ChannelConfig&, std::string_view)>;
using GlobalSetter = std::function<std::string(GlobalConfig&, std::string_view)>;

template <typename T>
auto real_field(double T::*member) {
  return [member](T& obj, std::string_view v) -> std::string {
    return parse_double(v, obj.*member) ? "" : fmt::format("expected a number, got '{}'", v);
  };
}

const std::map<std::string, ChannelSetter, std::less<>>& channel_keys() {
  static const auto keys = [] {
    std::map<std::string, ChannelSetter, std::less<>> m;
    auto real = [](auto getter) {
      return [getter](ChannelConfig& c, std::string_view v) -> std::string {
        return parse_double(v, getter(c)) ? "" : fmt::format("expected a number, got '{}'", v);
      };
    };
    auto integer = [](auto getter) {
      return [getter](ChannelConfig& c, std::string_view v) -> std::string {
        return parse_int(v, getter(c)) ? "" : fmt::format("expected an integer, got '{}'", v);
      };
    };
    auto flag = [](auto getter) {
      return [getter](ChannelConfig& c, std::string_view v) -> std::string {
        return parse_bool(v, getter(c)) ? "" : fmt::format("expected true or false, got '{}'", v);
      };
    };
    m["lna_gain"] = integer([](ChannelConfig& c) -> int& { return c.lna_gain.value; });
    m["pga_gain"] = integer([](ChannelConfig& c) -> int& { return c.pga_gain.value; });
    m["dsl_cutoff_hz"] = real([](ChannelConfig& c) -> double& { return c.dsl_cutoff_hz; });
    m["bpf.gm1"] = real([](ChannelConfig& c) -> double& { return c.bpf.gm1; });
    m["bpf.gm2"] = real([](ChannelConfig& c) -> double& { return c.bpf.gm2; });
    m["bpf.c1_code"] = integer([](ChannelConfig& c) -> int& { return c.bpf.c1_code.value; });
    m["bpf.c2_code"] = integer([](ChannelConfig& c) -> int& { return c.bpf.c2_code.value; });
    m["bpf.c_base"] = real([](ChannelConfig& c) -> double& { return c.bpf.c_base; });
    m["mode"] = [](ChannelConfig& c, std::string_view v) -> std::string {
      try {
        c.mode = mode_from_string(v);
        return "";
      } catch (const std::invalid_argument&) {
        return fmt::format("expected ADM or PFM, got '{}'", v);
      }
    };
    m["adm.delta_up"] = real([](ChannelConfig& c) -> double& { return c.adm.delta_up; });
    m["adm.delta_dn"] = real([](ChannelConfig& c) -> double& { return c.adm.delta_dn; });
    m["adm.hysteresis"] = real([](ChannelConfig& c) -> double& { return c.adm.hysteresis; });
    m["adm.v_ref_init"] = real([](ChannelConfig& c) -> double& { return c.adm.v_ref_init; });
    m["adm.threshold_sigma"] =
        real([](ChannelConfig& c) -> double& { return c.adm.threshold_sigma; });
    m["pfm.gm_amp"] = real([](ChannelConfig& c) -> double& { return c.pfm.gm_amp; });
    m["pfm.c_mem"] = real([](ChannelConfig& c) -> double& { return c.pfm.c_mem; });
    m["pfm.v_th"] = real([](ChannelConfig& c) -> double& { return c.pfm.v_th; });
    m["pfm.v_reset"] = real([](ChannelConfig& c) -> double& { return c.pfm.v_reset; });
    m["pfm.i_leak"] = real([](ChannelConfig& c) -> double& { return c.pfm.i_leak; });
    m["pfm.t_refr"] = real([](ChannelConfig& c) -> double& { return c.pfm.t_refr; });
    m["noise.white_density"] =
        real([](ChannelConfig& c) -> double& { return c.noise.white_density; });
    m["noise.flicker_corner_hz"] =
        real([](ChannelConfig& c) -> double& { return c.noise.flicker_corner_hz; });
    m["noise.enabled"] = flag([](ChannelConfig& c) -> bool& { return c.noise.enabled; });
    m["passthrough"] = flag([](ChannelConfig& c) -> bool& { return c.passthrough; });
    m["saturate"] = flag([](ChannelConfig& c) -> bool& { return c.saturate; });
    m["v_sat"] = real([](ChannelConfig& c) -> double& { return c.v_sat; });
    return m;
  }();
  return keys;
}

const std::map<std::string, GlobalSetter, std::less<>>& global_keys() {
  static const auto keys = [] {
    std::map<std::string, GlobalSetter, std::less<>> m;
    m["fs"] = real_field(&GlobalConfig::fs);
    m["input_scale"] = real_field(&GlobalConfig::input_scale);
    auto ns = [](std::int64_t HandshakeDelays::*member) {
      return [member](GlobalConfig& g, std::string_view v) -> std::string {
        return parse_int(v, g.aer.*member) ? ""
                                           : fmt::format("expected an integer, got '{}'", v);
      };
    };
    m["aer.req_rise_ns"] = ns(&HandshakeDelays::req_rise_ns);
    m["aer.ack_rise_ns"] = ns(&HandshakeDelays::ack_rise_ns);
    m["aer.req_fall_ns"] = ns(&HandshakeDelays::req_fall_ns);
    m["aer.ack_fall_ns"] = ns(&HandshakeDelays::ack_fall_ns);
    m["aer.jitter_ns"] = ns(&HandshakeDelays::jitter_ns);
    return m;
  }();
  return keys;
}

std::vector<Violation> validate_global(const GlobalConfig& g) {
  std::vector<Violation> out;
  if (!(g.fs >= 0.0)) out.push_back({"global.fs", "must be >= 0 (0 = automatic)"});
  if (!(g.input_scale > 0.0)) out.push_back({"global.input_scale", "must be > 0"});
  const auto& a = g.aer;
  if (a.req_rise_ns < 0) out.push_back({"global.aer.req_rise_ns", "must be >= 0"});
  if (a.ack_rise_ns < 0) out.push_back({"global.aer.ack_rise_ns", "must be >= 0"});
  if (a.req_fall_ns < 0) out.push_back({"global.aer.req_fall_ns", "must be >= 0"});
  if (a.ack_fall_ns < 0) out.push_back({"global.aer.ack_fall_ns", "must be >= 0"});
  if (a.jitter_ns < 0) out.push_back({"global.aer.jitter_ns", "must be >= 0"});
  if (a.req_rise_ns + a.ack_rise_ns + a.req_fall_ns + a.ack_fall_ns <= 0) {
    out.push_back({"global.aer", "phase delays must sum to at least 1 ns"});
  }
  return out;
}

}  // namespace

bool GlobalConfig::operator==(const GlobalConfig& o) const {
  return fs == o.fs && input_scale == o.input_scale && aer.req_rise_ns == o.aer.req_rise_ns &&
         aer.ack_rise_ns == o.aer.ack_rise_ns && aer.req_fall_ns == o.aer.req_fall_ns &&
         aer.ack_fall_ns == o.aer.ack_fall_ns && aer.jitter_ns == o.aer.jitter_ns;
}

const ChannelConfig* SystemConfig::find(int channel) const {
  for (const auto& c : channels) {
    if (c.channel == channel) return &c;
  }
  return nullptr;
}

ConfigParse parse_config(std::string_view text) {
  ConfigParse out;
  auto& errors = out.errors;
  std::map<int, ChannelConfig> channels;
  std::set<std::string> seen_sections;
  std::set<std::string> seen_keys;

  enum class Section { None, Global, Channel, Bad } section = Section::None;
  std::string section_name;
  int current = -1;

  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    std::string_view line = lines[i];
    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) {
      line = line.substr(0, c);
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back({fmt::format("line {}", lineno), "unterminated section header"});
        section = Section::Bad;
        continue;
      }
      section_name = std::string(trim(line.substr(1, line.size() - 2)));
      if (!seen_sections.insert(section_name).second) {
        errors.push_back({fmt::format("line {}", lineno),
                          fmt::format("duplicate section [{}]", section_name)});
        section = Section::Bad;
        continue;
      }
      if (section_name == "global") {
        section = Section::Global;
      } else if (section_name.rfind("channel.", 0) == 0) {
        int ch = -1;
        if (!parse_int(std::string_view(section_name).substr(8), ch)) {
          errors.push_back({fmt::format("line {}", lineno),
                            fmt::format("bad channel section [{}]", section_name)});
          section = Section::Bad;
          continue;
        }
        section = Section::Channel;
        current = ch;
        channels[ch].channel = ch;
      } else {
        errors.push_back({fmt::format("line {}", lineno),
                          fmt::format("unknown section [{}]", section_name)});
        section = Section::Bad;
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back({fmt::format("line {}", lineno), "expected key = value"});
      continue;
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section == Section::Bad) continue;
    if (section == Section::None) {
      errors.push_back({fmt::format("line {}", lineno), "key outside of any section"});
      continue;
    }

    const std::string path = section == Section::Global
                                 ? fmt::format("global.{}", key)
                                 : fmt::format("channel.{}.{}", current, key);
    if (!seen_keys.insert(path).second) {
      errors.push_back({path, fmt::format("duplicate key (line {})", lineno)});
      continue;
    }
    std::string msg;
    if (section == Section::Global) {
      const auto it = global_keys().find(key);
      if (it == global_keys().end()) {
        errors.push_back({path, fmt::format("unknown key (line {})", lineno)});
        continue;
      }
      msg = it->second(out.config.global, value);
    } else {
      const auto it = channel_keys().find(key);
      if (it == channel_keys().end()) {
        errors.push_back({path, fmt::format("unknown key (line {})", lineno)});
        continue;
      }
      msg = it->second(channels[current], value);
    }
    if (!msg.empty()) errors.push_back({path, fmt::format("{} (line {})", msg, lineno)});
  }

  for (auto& v : validate_global(out.config.global)) errors.push_back(std::move(v));
  for (auto& [ch, cfg] : channels) {
    for (const auto& v : validate_config(cfg)) {
      errors.push_back({fmt::format("channel.{}.{}", ch, v.field), v.message});
    }
    out.config.channels.push_back(cfg);
  }
  return out;
}

std::string to_ini(const SystemConfig& cfg) {
  std::string s = "[global]\n";
  const auto& g = cfg.global;
  s += fmt::format("fs = {}\ninput_scale = {}\n", g.fs, g.input_scale);
  s += fmt::format("aer.req_rise_ns = {}\naer.ack_rise_ns = {}\n", g.aer.req_rise_ns,
                   g.aer.ack_rise_ns);
  s += fmt::format("aer.req_fall_ns = {}\naer.ack_fall_ns = {}\naer.jitter_ns = {}\n",
                   g.aer.req_fall_ns, g.aer.ack_fall_ns, g.aer.jitter_ns);
  for (const auto& c : cfg.channels) {
    s += fmt::format("\n[channel.{}]\n", c.channel);
    // canonical_text starts with the channel line, which the section header carries.
    const std::string body = canonical_text(c);
    s += body.substr(body.find('\n') + 1);
  }
  return s;
}

namespace {

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

}  // namespace

SampledSignal parse_wav(std::span<const std::uint8_t> b, int channel, double scale) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw InputError("wav: not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = le32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) {
      // Tolerate a truncated final data chunk as written by some recorders.
      if (std::memcmp(b.data() + pos, "data", 4) != 0) throw InputError("wav: truncated chunk");
    }
    const std::size_t avail = std::min<std::size_t>(size, b.size() - body);
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (avail < 16) throw InputError("wav: short fmt chunk");
      format = le16(b, body);
      channels = le16(b, body + 2);
      rate = le32(b, body + 4);
      block_align = le16(b, body + 12);
      bits = le16(b, body + 14);
      if (format == 0xFFFE && avail >= 26) format = le16(b, body + 24);
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      data = b.subspan(body, avail);
      have_data = true;
    }
    pos = body + avail + (avail & 1u);
  }
  if (!have_fmt || !have_data) throw InputError("wav: missing fmt or data chunk");
  const bool pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
  const bool flt = format == 3 && bits == 32;
  if (!pcm && !flt) {
    throw InputError(fmt::format("wav: unsupported encoding (format {}, {} bits)", format, bits));
  }
  if (channels == 0 || rate == 0) throw InputError("wav: zero channels or sample rate");
  if (channel < 0 || channel >= channels) {
    throw InputError(fmt::format("wav: channel {} not present ({} channels)", channel, channels));
  }
  const std::size_t bytes = bits / 8;
  if (block_align != channels * bytes) throw InputError("wav: inconsistent block alignment");
  const std::size_t frames = data.size() / block_align;
  if (frames == 0) throw InputError("wav: no samples");

  SampledSignal s;
  s.fs = rate;
  s.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t at = f * block_align + static_cast<std::size_t>(channel) * bytes;
    double v = 0.0;
    if (flt) {
      float x;
      const std::uint32_t raw = le32(data, at);
      std::memcpy(&x, &raw, sizeof x);
      v = x;
    } else if (bits == 16) {
      v = static_cast<std::int16_t>(le16(data, at)) / 32768.0;
    } else if (bits == 24) {
      std::int32_t x = data[at] | (data[at + 1] << 8) | (data[at + 2] << 16);
      if (x & 0x800000) x -= 0x1000000;
      v = x / 8388608.0;
    } else {
      v = static_cast<std::int32_t>(le32(data, at)) / 2147483648.0;
    }
    if (!std::isfinite(v)) throw InputError("wav: non-finite sample");
    s.samples[f] = v * scale;
  }
  return s;
}

SampledSignal read_wav(const std::string& path, int channel, double scale) {
  const std::string raw = read_file(path);
  const auto* p = reinterpret_cast<const std::uint8_t*>(raw.data());
  return parse_wav({p, raw.size()}, channel, scale);
}

std::vector<std::uint8_t> encode_wav(const SampledSignal& s, int bits, double scale) {
  if (bits != 16 && bits != 24) throw std::invalid_argument("encode_wav: 16 or 24 bits only");
  const std::size_t bytes = static_cast<std::size_t>(bits) / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(s.size() * bytes);
  std::vector<std::uint8_t> out;
  auto put = [&](std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  const auto rate = static_cast<std::uint32_t>(std::llround(s.fs));
  tag("RIFF");
  put(36 + data_size, 4);
  tag("WAVE");
  tag("fmt ");
  put(16, 4);
  put(1, 2);
  put(1, 2);
  put(rate, 4);
  put(rate * static_cast<std::uint32_t>(bytes), 4);
  put(static_cast<std::uint32_t>(bytes), 2);
  put(static_cast<std::uint32_t>(bits), 2);
  tag("data");
  put(data_size, 4);
  const double full = bits == 16 ? 32767.0 : 8388607.0;
  for (double v : s.samples) {
    const double x = std::clamp(v / scale, -1.0, 1.0);
    const auto q = static_cast<std::int32_t>(std::lround(x * full));
    put(static_cast<std::uint32_t>(q), static_cast<int>(bytes));
  }
  return out;
}

void write_wav(const std::string& path, const SampledSignal& s, int bits, double scale) {
  const auto bytes = encode_wav(s, bits, scale);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot write {}", path));
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

SampledSignal parse_signal_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw InputError("signal csv: empty file");
  const auto header = split_fields(lines[0]);
  if (header.size() != 2 || header[0] != "t_s" || header[1] != "value") {
    throw InputError("signal csv: line 1: expected header 't_s,value'");
  }
  std::vector<double> t, v;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split_fields(lines[i]);
    double a = 0.0, b = 0.0;
    if (f.size() != 2 || !parse_double(f[0], a) || !parse_double(f[1], b)) {
      throw InputError(fmt::format("signal csv: line {}: expected two numbers", i + 1));
    }
    t.push_back(a);
    v.push_back(b);
  }
  if (t.size() < 2) throw InputError("signal csv: need at least two samples");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) throw InputError("signal csv: time must increase");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - (t.front() + static_cast<double>(i) * dt)) > 1e-3 * dt) {
      throw InputError(fmt::format("signal csv: line {}: non-uniform sampling", i + 2));
    }
  }
  SampledSignal s;
  s.fs = 1.0 / dt;
  // Timestamps printed in decimal rarely give an integral rate back exactly.
  if (std::abs(s.fs - std::round(s.fs)) < 1e-6 * s.fs) s.fs = std::round(s.fs);
  s.t0 = t.front();
  s.samples = std::move(v);
  return s;
}

void write_signal_csv(std::ostream& os, const SampledSignal& s) {
  os << "t_s,value\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << fmt::format("{},{}\n", s.t0 + static_cast<double>(i) / s.fs, s.samples[i]);
  }
}

SampledSignal read_signal(const std::string& path, int channel, double scale) {
  const std::string raw = read_file(path);
  if (raw.rfind("RIFF", 0) == 0) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(raw.data());
    return parse_wav({p, raw.size()}, channel, scale);
  }
  SampledSignal s = parse_signal_csv(raw);
  for (double& v : s.samples) v *= scale;
  return s;
}

SampledSignal resample(const SampledSignal& x, double fs_out) {
  x.validate();
  if (!(fs_out > 0.0)) throw std::invalid_argument("resample: output rate must be positive");
  if (fs_out == x.fs) return x;

  constexpr int kZeroCrossings = 16;
  constexpr int kTableRes = 512;  // kernel samples per input sample at unit cutoff
  const double cutoff = std::min(1.0, fs_out / x.fs);
  const double half_width = kZeroCrossings / cutoff;  // in input samples

  // Blackman-windowed sinc tabulated on [0, kZeroCrossings] zero crossings.
  std::vector<double> table(kZeroCrossings * kTableRes + 2);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double u = static_cast<double>(i) / kTableRes;
    const double sinc = u == 0.0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
    const double r = std::min(u / kZeroCrossings, 1.0);
    const double w = 0.42 + 0.5 * std::cos(std::numbers::pi * r) + 0.08 * std::cos(2.0 * std::numbers::pi * r);
    table[i] = sinc * w;
  }
  auto kernel = [&](double u) {
    const double a = std::abs(u) * cutoff * kTableRes;
    const auto k = static_cast<std::size_t>(a);
    if (k + 1 >= table.size()) return 0.0;
    const double frac = a - static_cast<double>(k);
    return cutoff * (table[k] + frac * (table[k + 1] - table[k]));
  };

  SampledSignal y;
  y.fs = fs_out;
  y.t0 = x.t0;
  const auto n_out = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(x.duration() * fs_out)));
  y.samples.resize(n_out);
  const auto n_in = static_cast<long long>(x.size());
  for (std::size_t m = 0; m < n_out; ++m) {
    const double p = static_cast<double>(m) * x.fs / fs_out;
    const auto lo = std::max<long long>(0, static_cast<long long>(std::ceil(p - half_width)));
    const auto hi = std::min<long long>(n_in - 1, static_cast<long long>(std::floor(p + half_width)));
    double acc = 0.0;
    for (long long k = lo; k <= hi; ++k) acc += x.samples[static_cast<std::size_t>(k)] * kernel(p - static_cast<double>(k));
    y.samples[m] = acc;
  }
  return y;
}

std::vector<Event> parse_event_csv(std::string_view text) {
  if (text.find('\r') != std::string_view::npos) {
    const auto before = text.substr(0, text.find('\r'));
    const auto line = std::count(before.begin(), before.end(), '\n') + 1;
    throw InputError(fmt::format("events: line {}: CR line ending (LF required)", line));
  }
  const auto lines = split_lines(text);
  if (lines.empty()) return {};
  if (lines[0] != "t_ns,source,channel,polarity") {
    throw InputError("events: line 1: expected header 't_ns,source,channel,polarity'");
  }
  std::vector<Event> events;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    if (f.size() != 4) {
      throw InputError(fmt::format("events: line {}: expected 4 fields, got {}", lineno, f.size()));
    }
    Event e;
    if (!parse_int(f[0], e.t_ns) || e.t_ns < 0) {
      throw InputError(fmt::format("events: line {}: bad timestamp '{}'", lineno, f[0]));
    }
    try {
      e.source = source_from_string(f[1]);
    } catch (const std::invalid_argument&) {
      throw InputError(fmt::format("events: line {}: bad source '{}'", lineno, f[1]));
    }
    if (!parse_int(f[2], e.channel) || e.channel < 0 || e.channel >= kNumChannels) {
      throw InputError(fmt::format("events: line {}: bad channel '{}'", lineno, f[2]));
    }
    try {
      e.polarity = polarity_from_string(f[3]);
      validate_event(e);
    } catch (const std::invalid_argument&) {
      throw InputError(fmt::format("events: line {}: bad polarity '{}' for source {}", lineno,
                                   f[3], f[1]));
    }
    if (!events.empty() && e.t_ns < events.back().t_ns) {
      throw InputError(fmt::format("events: line {}: timestamp decreases", lineno));
    }
    events.push_back(e);
  }
  return events;
}

void write_event_csv(std::ostream& os, std::span<const Event> events) {
  os << "t_ns,source,channel,polarity\n";
  for (const auto& e : events) {
    os << fmt::format("{},{},{},{}\n", e.t_ns, to_string(e.source), e.channel,
                      to_string(e.polarity));
  }
}

void write_report_csv(std::ostream& os, const MeasurementReport& r) {
  r.validate();
  os << "# kind=" << to_string(r.kind) << '\n';
  for (const auto& [k, v] : r.metadata) os << "# " << k << '=' << v << '\n';
  switch (r.kind) {
    case ReportKind::Sweep: os << "f_hz,gain_db\n"; break;
    case ReportKind::Psd: os << "f_hz,psd_v2_per_hz\n"; break;
    case ReportKind::SndrCurve: os << "amplitude_dbv,sndr_db\n"; break;
    case ReportKind::RateCurve: os << "amplitude_v,rate_hz\n"; break;
  }
  for (std::size_t i = 0; i < r.x.size(); ++i) os << fmt::format("{},{}\n", r.x[i], r.y[i]);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace afe
