#include "afe/aer.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <queue>
#include <random>
#include <stdexcept>

namespace afe {

AddressWord encode_address(const Event& e) {
  validate_event(e);
  if (e.source == Source::Adm) {
    const std::uint32_t pol = e.polarity == Polarity::Up ? 1u : 0u;
    return {(static_cast<std::uint32_t>(e.channel) << 1) | pol};
  }
  return {static_cast<std::uint32_t>(e.channel)};
}

std::pair<int, Polarity> decode_address(AddressWord w, Source source) {
  if (source == Source::Adm) {
    if (w.bits >= 32) throw std::out_of_range(fmt::format("ADM address {} exceeds 5 bits", w.bits));
    return {static_cast<int>(w.bits >> 1), (w.bits & 1u) ? Polarity::Up : Polarity::Dn};
  }
  if (w.bits >= 16) throw std::out_of_range(fmt::format("PFM address {} exceeds 4 bits", w.bits));
  return {static_cast<int>(w.bits), Polarity::Na};
}

std::vector<Event> arbitrate(std::span<const std::vector<Event>> per_channel) {
  if (per_channel.size() > static_cast<std::size_t>(kNumChannels)) {
    throw std::invalid_argument("arbitrate: more than 16 channel streams");
  }
  std::size_t total = 0;
  for (std::size_t ch = 0; ch < per_channel.size(); ++ch) {
    const auto& seq = per_channel[ch];
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i].channel != static_cast<int>(ch)) {
        throw std::invalid_argument(
            fmt::format("arbitrate: stream {} carries an event of channel {}", ch, seq[i].channel));
      }
      if (i > 0 && seq[i].t_ns < seq[i - 1].t_ns) {
        throw std::invalid_argument(fmt::format("arbitrate: stream {} not time-ordered", ch));
      }
    }
    total += seq.size();
  }

  // k-way merge keyed on (t_ns, channel); heads of each stream only.
  using Head = std::pair<std::int64_t, std::size_t>;
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
  std::vector<std::size_t> pos(per_channel.size(), 0);
  for (std::size_t ch = 0; ch < per_channel.size(); ++ch) {
    if (!per_channel[ch].empty()) heap.emplace(per_channel[ch].front().t_ns, ch);
  }
  std::vector<Event> merged;
  merged.reserve(total);
  while (!heap.empty()) {
    const auto [t, ch] = heap.top();
    heap.pop();
    merged.push_back(per_channel[ch][pos[ch]++]);
    if (pos[ch] < per_channel[ch].size()) heap.emplace(per_channel[ch][pos[ch]].t_ns, ch);
  }
  return merged;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "IDLE";
    case Phase::ReqHigh: return "REQ_HIGH";
    case Phase::AckHigh: return "ACK_HIGH";
    case Phase::ReqLowWait: return "REQ_LOW_WAIT";
  }
  return "?";
}

Phase next_phase(Phase p) {
  switch (p) {
    case Phase::Idle: return Phase::ReqHigh;
    case Phase::ReqHigh: return Phase::AckHigh;
    case Phase::AckHigh: return Phase::ReqLowWait;
    case Phase::ReqLowWait: return Phase::Idle;
  }
  return Phase::Idle;
}

void LinkState::advance(Phase to, std::int64_t t_ns) {
  if (to != next_phase(phase_)) {
    throw std::logic_error(fmt::format("link: illegal transition {} -> {}", to_string(phase_),
                                       to_string(to)));
  }
  if (t_ns < t_ns_) throw std::logic_error("link: time moved backwards");
  phase_ = to;
  t_ns_ = t_ns;
}

HandshakeResult handshake_run(std::span<const Event> events, const HandshakeDelays& d) {
  if (d.req_rise_ns < 0 || d.ack_rise_ns < 0 || d.req_fall_ns < 0 || d.ack_fall_ns < 0 ||
      d.jitter_ns < 0) {
    throw std::invalid_argument("handshake: delays must be non-negative");
  }
  if (d.req_rise_ns + d.ack_rise_ns + d.req_fall_ns + d.ack_fall_ns == 0) {
    throw std::invalid_argument("handshake: phase delays sum to zero");
  }
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].t_ns < events[i - 1].t_ns) {
      throw std::invalid_argument("handshake: event stream not time-ordered");
    }
  }

  std::mt19937_64 rng(d.seed);
  std::uniform_int_distribution<std::int64_t> jitter(0, d.jitter_ns);
  auto delay = [&](std::int64_t base) { return d.jitter_ns > 0 ? base + jitter(rng) : base; };

  HandshakeResult out;
  out.delivered.reserve(events.size());
  out.trace.reserve(4 * events.size());
  LinkState link;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    const std::int64_t start = std::max(e.t_ns, link.time_ns());
    const std::int64_t d_req = delay(d.req_rise_ns);
    const std::int64_t d_ack = delay(d.ack_rise_ns);
    const std::int64_t d_rel = delay(d.req_fall_ns);
    const std::int64_t d_fin = delay(d.ack_fall_ns);

    std::int64_t t = start;
    auto step = [&](Phase to, std::int64_t dt) {
      t += dt;
      out.trace.push_back({i, link.phase(), to, t});
      link.advance(to, t);
    };
    step(Phase::ReqHigh, d_req);
    const std::int64_t req = t;
    step(Phase::AckHigh, d_ack);
    step(Phase::ReqLowWait, d_rel);
    step(Phase::Idle, d_fin);
    out.delivered.push_back({e, encode_address(e), req, t, d_req + d_ack + d_rel + d_fin});
  }
  return out;
}

}  // namespace afe
