#pragma once

// File formats: INI channel configuration, WAV / CSV signal ingestion,
// event CSV and report CSV.

#include "afe/aer.hpp"
#include "afe/core.hpp"
#include "afe/measure.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace afe {

/// Unreadable or ill-formed input data (signal or event files).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalConfig {
  double fs = 0.0;           // simulation rate, 0 = automatic
  double input_scale = 1.0;  // volts at WAV full scale
  HandshakeDelays aer;

  bool operator==(const GlobalConfig& o) const;
};

struct SystemConfig {
  GlobalConfig global;
  std::vector<ChannelConfig> channels;  // ascending channel index

  const ChannelConfig* find(int channel) const;
};

struct ConfigParse {
  SystemConfig config;
  std::vector<Violation> errors;  // "line N" messages for syntax, field paths for values
};

/// Parses `[global]` and `[channel.N]` sections of `key = value` lines.
/// Keys inside a channel section are ChannelConfig field paths
/// (`lna_gain`, `bpf.gm1`, `adm.delta_up`, ...). Missing keys keep their
/// defaults; unknown keys and sections are errors. Every error is collected,
/// followed by validate_config of each channel.
ConfigParse parse_config(std::string_view text);
std::string to_ini(const SystemConfig& cfg);

/// Reads PCM 16/24/32-bit or 32-bit float WAV; returns the selected channel
/// scaled so full scale maps to `scale` volts. Throws InputError.
SampledSignal read_wav(const std::string& path, int channel = 0, double scale = 1.0);
SampledSignal parse_wav(std::span<const std::uint8_t> bytes, int channel = 0, double scale = 1.0);

/// 16- or 24-bit mono PCM; samples are clipped to +/- scale.
std::vector<std::uint8_t> encode_wav(const SampledSignal& s, int bits = 16, double scale = 1.0);
void write_wav(const std::string& path, const SampledSignal& s, int bits = 16, double scale = 1.0);

/// `t_s,value` with a header line and uniform spacing. Throws InputError.
SampledSignal parse_signal_csv(std::string_view text);
void write_signal_csv(std::ostream& os, const SampledSignal& s);

/// WAV when the file starts with "RIFF", CSV otherwise.
SampledSignal read_signal(const std::string& path, int channel = 0, double scale = 1.0);

/// Band-limited (windowed-sinc) resampling to fs_out.
SampledSignal resample(const SampledSignal& x, double fs_out);

/// `t_ns,source,channel,polarity`, header required unless the file is empty, LF endings, timestamps
/// non-decreasing. Throws InputError naming the offending line.
std::vector<Event> parse_event_csv(std::string_view text);
void write_event_csv(std::ostream& os, std::span<const Event> events);

/// `# kind=...` and `# key=value` metadata comments, then a header and rows.
void write_report_csv(std::ostream& os, const MeasurementReport& r);

std::string read_file(const std::string& path);

}  // namespace afe
