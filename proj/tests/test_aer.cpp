#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "afe/aer.hpp"

#include <algorithm>
#include <map>
#include <random>

using namespace afe;

namespace {

std::vector<std::vector<Event>> random_streams(std::size_t per_channel, std::mt19937_64& rng,
                                               Source src = Source::Pfm) {
  std::uniform_int_distribution<std::int64_t> gap(0, 500);
  std::vector<std::vector<Event>> s(kNumChannels);
  for (int ch = 0; ch < kNumChannels; ++ch) {
    std::int64_t t = 0;
    for (std::size_t i = 0; i < per_channel; ++i) {
      t += gap(rng);
      const Polarity p = src == Source::Pfm ? Polarity::Na : (rng() & 1 ? Polarity::Up : Polarity::Dn);
      s[static_cast<std::size_t>(ch)].push_back({t, src, ch, p});
    }
  }
  return s;
}

}  // namespace

TEST_CASE("address words") {
  CHECK(encode_address({0, Source::Adm, 3, Polarity::Up}).bits == 0b00111u);
  CHECK(encode_address({0, Source::Adm, 3, Polarity::Dn}).bits == 0b00110u);
  CHECK(encode_address({0, Source::Adm, 15, Polarity::Up}).bits == 31u);
  CHECK(encode_address({0, Source::Pfm, 9, Polarity::Na}).bits == 9u);
  CHECK(decode_address({7}, Source::Adm) == std::pair{3, Polarity::Up});
  for (int ch = 0; ch < kNumChannels; ++ch) {
    for (auto p : {Polarity::Up, Polarity::Dn}) {
      const Event e{0, Source::Adm, ch, p};
      CHECK(decode_address(encode_address(e), Source::Adm) == std::pair{ch, p});
    }
    const Event e{0, Source::Pfm, ch, Polarity::Na};
    CHECK(decode_address(encode_address(e), Source::Pfm) == std::pair{ch, Polarity::Na});
  }
  CHECK_THROWS_AS(decode_address({32}, Source::Adm), std::out_of_range);
  CHECK_THROWS_AS(decode_address({16}, Source::Pfm), std::out_of_range);
  CHECK_THROWS_AS(encode_address({0, Source::Pfm, 1, Polarity::Up}), std::invalid_argument);
}

TEST_CASE("arbitration breaks ties by channel index") {
  std::vector<std::vector<Event>> s(3);
  s[2].push_back({100, Source::Pfm, 2, Polarity::Na});
  s[0].push_back({100, Source::Pfm, 0, Polarity::Na});
  s[1].push_back({50, Source::Pfm, 1, Polarity::Na});
  const auto m = arbitrate(s);
  REQUIRE(m.size() == 3);
  CHECK(m[0].channel == 1);
  CHECK(m[1].channel == 0);
  CHECK(m[2].channel == 2);
}

TEST_CASE("arbitration equals a global sort") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_streams(200, rng);
    std::vector<Event> all;
    for (const auto& v : s) all.insert(all.end(), v.begin(), v.end());
    std::stable_sort(all.begin(), all.end(), [](const Event& a, const Event& b) {
      return a.t_ns != b.t_ns ? a.t_ns < b.t_ns : a.channel < b.channel;
    });
    CHECK(arbitrate(s) == all);
  }
}

TEST_CASE("arbitration rejects malformed input") {
  std::vector<std::vector<Event>> s(2);
  s[0] = {{10, Source::Pfm, 0, Polarity::Na}, {5, Source::Pfm, 0, Polarity::Na}};
  CHECK_THROWS_AS(arbitrate(s), std::invalid_argument);
  s[0] = {{10, Source::Pfm, 1, Polarity::Na}};
  CHECK_THROWS_AS(arbitrate(s), std::invalid_argument);
  CHECK_THROWS_AS(arbitrate(std::vector<std::vector<Event>>(17)), std::invalid_argument);
  CHECK(arbitrate(std::vector<std::vector<Event>>(16)).empty());
}

TEST_CASE("single event handshake") {
  const std::vector<Event> ev{{1000, Source::Adm, 4, Polarity::Dn}};
  const auto r = handshake_run(ev, HandshakeDelays{});
  REQUIRE(r.delivered.size() == 1);
  CHECK(r.delivered[0].delivered_ns == 1040);
  CHECK(r.delivered[0].req_ns == 1010);
  CHECK(r.delivered[0].delay_sum_ns == 40);
  CHECK(r.delivered[0].word.bits == 8u);
  REQUIRE(r.trace.size() == 4);
  const Phase order[] = {Phase::ReqHigh, Phase::AckHigh, Phase::ReqLowWait, Phase::Idle};
  const std::int64_t times[] = {1010, 1020, 1030, 1040};
  for (int k = 0; k < 4; ++k) {
    CHECK(r.trace[k].to == order[k]);
    CHECK(r.trace[k].t_ns == times[k]);
  }
}

TEST_CASE("back-to-back events queue behind the link") {
  const std::vector<Event> ev{{0, Source::Pfm, 0, Polarity::Na},
                              {5, Source::Pfm, 1, Polarity::Na},
                              {500, Source::Pfm, 2, Polarity::Na}};
  const auto r = handshake_run(ev, HandshakeDelays{});
  CHECK(r.delivered[0].delivered_ns == 40);
  CHECK(r.delivered[1].req_ns == 50);
  CHECK(r.delivered[1].delivered_ns == 80);
  CHECK(r.delivered[2].delivered_ns == 540);
}

TEST_CASE("link state machine rejects illegal transitions") {
  LinkState l;
  CHECK_THROWS_AS(l.advance(Phase::AckHigh, 1), std::logic_error);
  l.advance(Phase::ReqHigh, 1);
  CHECK_THROWS_AS(l.advance(Phase::ReqHigh, 2), std::logic_error);
  CHECK_THROWS_AS(l.advance(Phase::Idle, 2), std::logic_error);
  CHECK_THROWS_AS(l.advance(Phase::AckHigh, 0), std::logic_error);
  l.advance(Phase::AckHigh, 2);
  l.advance(Phase::ReqLowWait, 2);
  l.advance(Phase::Idle, 3);
  CHECK(l.phase() == Phase::Idle);
  CHECK(l.time_ns() == 3);
}

TEST_CASE("handshake rejects bad parameters") {
  const std::vector<Event> ev{{0, Source::Pfm, 0, Polarity::Na}};
  HandshakeDelays d;
  d.req_rise_ns = -1;
  CHECK_THROWS_AS(handshake_run(ev, d), std::invalid_argument);
  d = HandshakeDelays{0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(handshake_run(ev, d), std::invalid_argument);
  const std::vector<Event> bad{{5, Source::Pfm, 0, Polarity::Na}, {4, Source::Pfm, 0, Polarity::Na}};
  CHECK_THROWS_AS(handshake_run(bad, HandshakeDelays{}), std::invalid_argument);
  CHECK(handshake_run({}, HandshakeDelays{}).delivered.empty());
}

TEST_CASE("jittered link: exactly once, ordered, phase legal") {
  std::mt19937_64 rng(77);
  const auto s = random_streams(2000, rng, Source::Adm);
  const auto merged = arbitrate(s);
  HandshakeDelays d{3, 7, 2, 5, 20, 123};
  const auto r = handshake_run(merged, d);
  REQUIRE(r.delivered.size() == merged.size());
  std::map<int, std::int64_t> last;
  for (std::size_t i = 0; i < r.delivered.size(); ++i) {
    const auto& del = r.delivered[i];
    CHECK(del.event == merged[i]);
    CHECK(del.delivered_ns >= del.event.t_ns + del.delay_sum_ns);
    CHECK(del.delay_sum_ns >= 17);
    CHECK(del.delay_sum_ns <= 17 + 4 * 20);
    if (i > 0) CHECK(del.req_ns > r.delivered[i - 1].delivered_ns);
    if (last.count(del.event.channel)) CHECK(del.event.t_ns >= last[del.event.channel]);
    last[del.event.channel] = del.event.t_ns;
  }
  REQUIRE(r.trace.size() == 4 * merged.size());
  Phase p = Phase::Idle;
  std::int64_t t = 0;
  for (const auto& tr : r.trace) {
    CHECK(tr.from == p);
    CHECK(tr.to == next_phase(p));
    CHECK(tr.t_ns >= t);
    p = tr.to;
    t = tr.t_ns;
  }
  CHECK(p == Phase::Idle);
  // same seed, same timing
  CHECK(handshake_run(merged, d).trace.back().t_ns == r.trace.back().t_ns);
}
