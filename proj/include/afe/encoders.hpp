#pragma once

#include "afe/core.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace afe {

/// Level-crossing delta modulator state. The realised thresholds include the
/// static mismatch drawn once per instance.
struct AdmState {
  double v_ref = 0.0;
  bool armed_up = true;
  bool armed_dn = true;
  double realized_delta_up = 0.0;
  double realized_delta_dn = 0.0;
  // v_ref = v_origin + realized_delta_up * ups - realized_delta_dn * dns
  double v_origin = 0.0;
  std::int64_t ups = 0;
  std::int64_t dns = 0;
};

/// Fresh encoder: v_ref = v_ref_init, both comparators armed, each threshold
/// offset by an N(0, threshold_sigma) draw from `seed`. Draws that would put
/// a threshold at or below the hysteresis are redrawn.
AdmState make_adm_state(const AdmConfig& cfg, std::uint64_t seed);

/// Scans x in order. An armed comparator fires when x - v_ref reaches its
/// threshold; v_ref then steps by that threshold and the comparator stays
/// disarmed until the input is back at least `hysteresis` inside the new
/// threshold. At most one UP or DN event per sample.
std::vector<Event> adm_encode(const SampledSignal& x, const AdmConfig& cfg, AdmState& state,
                              int channel);

struct LifState {
  double v_mem = 0.0;
  // Samples stamped before this instant hold the membrane at v_reset.
  std::int64_t refr_until_ns = std::numeric_limits<std::int64_t>::min();
};

struct PfmResult {
  std::vector<Event> events;
  SampledSignal membrane;
};

/// Half-wave rectifier and transconductor feeding a forward-Euler LIF neuron.
PfmResult pfm_encode(const SampledSignal& x, const PfmConfig& cfg, LifState& state, int channel);

/// Analytic interspike interval for a constant input current; nullopt when
/// the current never overcomes the leak.
std::optional<double> lif_isi(double i_const, const PfmConfig& cfg);

}  // namespace afe
