#pragma once

// Uniform adaptors over the two node state machines so the simulator and
// the explorer can be written once.

#include <concepts>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ringmx/maekawa.hpp"
#include "ringmx/ring_mutex.hpp"

namespace ringmx {

enum class Algo : std::uint8_t { Ring, MaekawaBasic, MaekawaFull };

constexpr std::string_view to_string(Algo a) noexcept {
  switch (a) {
    case Algo::Ring: return "ring";
    case Algo::MaekawaBasic: return "maekawa-basic";
    case Algo::MaekawaFull: return "maekawa-full";
  }
  return "?";
}

inline Algo parse_algo(std::string_view s) {
  if (s == "ring") return Algo::Ring;
  if (s == "maekawa-basic") return Algo::MaekawaBasic;
  if (s == "maekawa-full") return Algo::MaekawaFull;
  throw InvalidScenario("unknown algorithm \"" + std::string(s) + "\"");
}

namespace encode {

inline void put(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put(std::string& out, ProcessId p) { put(out, static_cast<std::uint64_t>(to_int(p))); }

}  // namespace encode

template <class P>
concept Protocol = requires(const P p, const QuorumSystem& qs, typename P::State s, ProcessId id,
                            const typename P::Message& m, std::string& buf) {
  { p.init(qs, id) } -> std::same_as<typename P::State>;
  p.request(qs, s).state;
  p.release(qs, s).outbox;
  p.receive(qs, s, id, m).state;
  { P::id_of(s) } -> std::same_as<ProcessId>;
  { P::stat(s) } -> std::same_as<Stat>;
  { P::queue_len(s) } -> std::same_as<std::size_t>;
  { P::wait_edges(s) } -> std::same_as<std::vector<WaitEdge>>;
  { P::state_json(s) } -> std::same_as<nlohmann::ordered_json>;
  { P::message_json(m) } -> std::same_as<nlohmann::ordered_json>;
  P::encode_state(buf, s);
  P::encode_message(buf, m);
};

struct RingProtocol {
  using State = RingNodeState;
  using Message = RingMessage;

  State init(const QuorumSystem& qs, ProcessId id) const { return make_ring_node(qs, id); }
  RingStep request(const QuorumSystem& qs, State s) const { return on_request_cs(qs, std::move(s)); }
  RingStep release(const QuorumSystem& qs, State s) const { return on_release_cs(qs, std::move(s)); }
  RingStep receive(const QuorumSystem& qs, State s, ProcessId /*from*/, const Message& m) const {
    return m.kind == RingKind::Req ? on_receive_req(qs, std::move(s), m.origin)
                                   : on_receive_rel(qs, std::move(s), m.origin);
  }

  static ProcessId id_of(const State& s) { return s.id; }
  static Stat stat(const State& s) { return s.stat; }
  static std::size_t queue_len(const State& s) { return s.queue.size(); }
  static std::vector<WaitEdge> wait_edges(const State& s) { return wait_for_edges(s); }
  static std::optional<std::string> check(const QuorumSystem& qs, const State& s) { return check_invariants(qs, s); }

  static nlohmann::ordered_json state_json(const State& s) {
    nlohmann::ordered_json j;
    j["stat"] = std::string(to_string(s.stat));
    auto q = nlohmann::ordered_json::array();
    for (ProcessId p : s.queue) q.push_back(to_int(p));
    j["queue"] = std::move(q);
    j["blocked"] = s.blocked;
    j["circulated"] = s.circulated;
    return j;
  }

  static nlohmann::ordered_json message_json(const Message& m) {
    nlohmann::ordered_json j;
    j["kind"] = std::string(to_string(m.kind));
    j["origin"] = to_int(m.origin);
    return j;
  }

  static void encode_state(std::string& out, const State& s) {
    out.push_back(static_cast<char>(s.stat));
    out.push_back(static_cast<char>(s.blocked));
    out.push_back(static_cast<char>(s.circulated));
    encode::put(out, s.queue.size());
    for (ProcessId p : s.queue) encode::put(out, p);
  }
  static void encode_message(std::string& out, const Message& m) {
    out.push_back(static_cast<char>(m.kind));
    encode::put(out, m.origin);
  }
};

struct MaekawaProtocol {
  using State = MaekawaNodeState;
  using Message = MaekawaMessage;

  MaekawaMode mode = MaekawaMode::Basic;

  State init(const QuorumSystem& /*qs*/, ProcessId id) const { return make_maekawa_node(id, mode); }
  MaekawaStep request(const QuorumSystem& qs, State s) const { return mk_request_cs(qs, std::move(s)); }
  MaekawaStep release(const QuorumSystem& qs, State s) const { return mk_release_cs(qs, std::move(s)); }
  MaekawaStep receive(const QuorumSystem& qs, State s, ProcessId from, const Message& m) const {
    return mk_on_message(qs, std::move(s), from, m);
  }

  static ProcessId id_of(const State& s) { return s.id; }
  static Stat stat(const State& s) { return s.stat; }
  static std::size_t queue_len(const State& s) { return s.pending.size(); }
  static std::vector<WaitEdge> wait_edges(const State& s) { return mk_wait_for_edges(s); }
  static std::optional<std::string> check(const QuorumSystem& qs, const State& s) { return mk_check_invariants(qs, s); }

  static nlohmann::ordered_json ts_json(const Timestamp& t) {
    nlohmann::ordered_json j;
    j["clock"] = t.clock;
    j["id"] = to_int(t.id);
    return j;
  }

  static nlohmann::ordered_json state_json(const State& s) {
    nlohmann::ordered_json j;
    j["stat"] = std::string(to_string(s.stat));
    j["clock"] = s.clock;
    j["locked_for"] = s.locked_for ? nlohmann::ordered_json(to_int(s.locked_for->origin)) : nlohmann::ordered_json();
    auto q = nlohmann::ordered_json::array();
    for (const auto& p : s.pending) q.push_back(to_int(p.origin));
    j["pending"] = std::move(q);
    auto grants = nlohmann::ordered_json::array();
    if (s.requesting)
      for (ProcessId g : s.requesting->grants) grants.push_back(to_int(g));
    j["grants"] = std::move(grants);
    return j;
  }

  static nlohmann::ordered_json message_json(const Message& m) {
    nlohmann::ordered_json j;
    j["kind"] = std::string(to_string(m.kind));
    j["origin"] = to_int(m.origin);
    if (m.ts) j["ts"] = ts_json(*m.ts);
    return j;
  }

  static void encode_state(std::string& out, const State& s) {
    out.push_back(static_cast<char>(s.stat));
    encode::put(out, s.clock);
    out.push_back(static_cast<char>(s.locked_for.has_value()));
    if (s.locked_for) {
      encode::put(out, s.locked_for->origin);
      encode::put(out, s.locked_for->ts.clock);
    }
    out.push_back(static_cast<char>(s.inquire_sent));
    encode::put(out, s.pending.size());
    for (const auto& p : s.pending) {
      encode::put(out, p.origin);
      encode::put(out, p.ts.clock);
      out.push_back(static_cast<char>(p.failed_sent));
    }
    out.push_back(static_cast<char>(s.requesting.has_value()));
    if (s.requesting) {
      encode::put(out, s.requesting->ts.clock);
      for (const auto* set : {&s.requesting->grants, &s.requesting->faileds, &s.requesting->deferred_inquiries}) {
        encode::put(out, set->size());
        for (ProcessId p : *set) encode::put(out, p);
      }
    }
  }
  static void encode_message(std::string& out, const Message& m) {
    out.push_back(static_cast<char>(m.kind));
    encode::put(out, m.origin);
    encode::put(out, m.ts ? m.ts->clock : 0);
  }
};

static_assert(Protocol<RingProtocol>);
static_assert(Protocol<MaekawaProtocol>);

template <Protocol P>
struct Settled {
  typename P::State state;
  std::vector<Outgoing<typename P::Message>> network;
  std::size_t local_deliveries = 0;
};

// Feeds self-addressed messages straight back into the node, in emission
// order, until only messages for other nodes remain.
template <Protocol P, class Step>
Settled<P> settle_local(const P& proto, const QuorumSystem& qs, Step step) {
  Settled<P> out{std::move(step.state), {}, 0};
  const ProcessId self = P::id_of(out.state);
  std::deque<typename P::Message> local;
  auto sort_out = [&](auto& outbox) {
    for (auto& o : outbox) {
      if (o.to == self)
        local.push_back(std::move(o.msg));
      else
        out.network.push_back(std::move(o));
    }
  };
  sort_out(step.outbox);
  while (!local.empty()) {
    auto msg = std::move(local.front());
    local.pop_front();
    ++out.local_deliveries;
    auto next = proto.receive(qs, std::move(out.state), self, msg);
    out.state = std::move(next.state);
    sort_out(next.outbox);
  }
  return out;
}

}  // namespace ringmx
