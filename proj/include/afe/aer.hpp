#pragma once

// Address-event output links. Each encoding path owns one link: a fixed
// priority arbiter merges the per-channel streams and a four-phase
// REQ/ACK handshake moves one address word per cycle.

#include "afe/core.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace afe {

/// ADM: (channel << 1) | polarity with UP = 1, 5 bits. PFM: channel, 4 bits.
struct AddressWord {
  std::uint32_t bits = 0;
  friend bool operator==(AddressWord, AddressWord) = default;
};

AddressWord encode_address(const Event& e);

/// Throws std::out_of_range for words outside the source's address space.
std::pair<int, Polarity> decode_address(AddressWord w, Source source);

/// Merges time-ordered per-channel streams (index = channel) by (t_ns, channel).
/// Throws std::invalid_argument for an out-of-order stream, a stream whose
/// events name a different channel, or more than 16 streams.
std::vector<Event> arbitrate(std::span<const std::vector<Event>> per_channel);

enum class Phase { Idle, ReqHigh, AckHigh, ReqLowWait };

std::string_view to_string(Phase p);

/// Legal successor in the REQ^ -> ACK^ -> REQv -> ACKv cycle.
Phase next_phase(Phase p);

struct HandshakeDelays {
  std::int64_t req_rise_ns = 10;
  std::int64_t ack_rise_ns = 10;
  std::int64_t req_fall_ns = 10;
  std::int64_t ack_fall_ns = 10;
  // Each phase delay gains a uniform extra in [0, jitter_ns].
  std::int64_t jitter_ns = 0;
  std::uint64_t seed = 0;
};

struct Transition {
  std::size_t index = 0;  // position of the event in the submitted stream
  Phase from = Phase::Idle;
  Phase to = Phase::ReqHigh;
  std::int64_t t_ns = 0;
};

struct Delivery {
  Event event;
  AddressWord word;
  std::int64_t req_ns = 0;        // REQ rises
  std::int64_t delivered_ns = 0;  // ACK falls, link idle again
  std::int64_t delay_sum_ns = 0;  // realised sum of the four phase delays
};

struct HandshakeResult {
  std::vector<Delivery> delivered;
  std::vector<Transition> trace;
};

/// Single link state machine. advance() rejects anything but the next
/// phase of the cycle with std::logic_error.
class LinkState {
 public:
  Phase phase() const { return phase_; }
  std::int64_t time_ns() const { return t_ns_; }
  void advance(Phase to, std::int64_t t_ns);

 private:
  Phase phase_ = Phase::Idle;
  std::int64_t t_ns_ = 0;
};

/// Event-granularity simulation of the handshake. Events queue FIFO; a new
/// REQ waits for the previous ACK to fall. Throws std::invalid_argument for
/// an unordered stream or negative / all-zero delays.
HandshakeResult handshake_run(std::span<const Event> events, const HandshakeDelays& delays);

}  // namespace afe
