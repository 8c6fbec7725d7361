#pragma once

// Deterministic discrete-event simulator for the node state machines.
//
// Time is an integer tick. Every ordered pair of processes has a FIFO
// channel; a delay model assigns each send a delivery tick, clamped so a
// message never overtakes an earlier one on the same channel. Nodes never
// see the clock. Ties are broken deterministically: scenario events (request
// injections and automatic releases) run before deliveries due at the same
// tick, and deliveries due at the same tick run in (src, dst) order.
//
// A delivery script, when present, fixes the order of the first deliveries
// explicitly (one per tick); once it is exhausted the delay model takes over.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ringmx/protocol.hpp"
#include "ringmx/quorum.hpp"
#include "ringmx/wait_for.hpp"

namespace ringmx {

using Tick = std::uint64_t;
using Channel = std::pair<ProcessId, ProcessId>;  // (src, dst)

// ---------------------------------------------------------------- scenario

struct UnitDelay {};
struct FixedDelay {
  Tick fallback = 1;
  std::map<Channel, Tick> per_channel;
};
struct UniformRandomDelay {
  Tick lo = 1;
  Tick hi = 1;
  std::uint64_t seed = 0;
};
using DelayModel = std::variant<UnitDelay, FixedDelay, UniformRandomDelay>;

struct ScenarioEvent {
  Tick at = 0;
  ProcessId node{};
};

struct Scenario {
  std::filesystem::path quorum_file;
  Algo algo = Algo::Ring;
  std::vector<ScenarioEvent> events;  // each is a CS request
  Tick cs_duration = 1;
  DelayModel delay = UnitDelay{};
  std::optional<std::vector<Channel>> delivery_script;
  bool count_self_messages = false;
  std::uint64_t max_steps = 1'000'000;
};

inline Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  Scenario sc;
  try {
    std::filesystem::path qf = j.at("quorum_file").get<std::string>();
    sc.quorum_file = qf.is_absolute() || base_dir.empty() ? qf : base_dir / qf;
    sc.algo = parse_algo(j.at("algo").get<std::string>());
    sc.cs_duration = j.value("cs_duration", Tick{1});
    sc.count_self_messages = j.value("count_self_messages", false);
    sc.max_steps = j.value("max_steps", std::uint64_t{1'000'000});
    for (const auto& e : j.at("events")) {
      if (e.value("action", std::string("request")) != "request")
        throw InvalidScenario("unsupported event action " + e.at("action").dump());
      auto at = e.at("at").get<std::int64_t>();
      if (at < 0) throw InvalidScenario("event time must be non-negative");
      sc.events.push_back({static_cast<Tick>(at), pid(e.at("node").get<int>())});
    }
    if (j.contains("delay_model")) {
      const auto& d = j.at("delay_model");
      const auto type = d.at("type").get<std::string>();
      if (type == "unit") {
        sc.delay = UnitDelay{};
      } else if (type == "fixed") {
        FixedDelay f;
        f.fallback = d.value("default", Tick{1});
        if (d.contains("channels"))
          for (const auto& c : d.at("channels"))
            f.per_channel[{pid(c.at("src").get<int>()), pid(c.at("dst").get<int>())}] = c.at("ticks").get<Tick>();
        sc.delay = f;
      } else if (type == "uniform_random") {
        sc.delay = UniformRandomDelay{d.at("lo").get<Tick>(), d.at("hi").get<Tick>(), d.at("seed").get<std::uint64_t>()};
      } else {
        throw InvalidScenario("unknown delay model \"" + type + "\"");
      }
    }
    if (j.contains("delivery_script")) {
      std::vector<Channel> script;
      for (const auto& s : j.at("delivery_script"))
        script.emplace_back(pid(s.at("src").get<int>()), pid(s.at("dst").get<int>()));
      sc.delivery_script = std::move(script);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidScenario(std::string("scenario json: ") + e.what());
  }
  return sc;
}

inline Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidScenario("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidScenario(path.string() + ": " + e.what());
  }
  return scenario_from_json(j, path.parent_path());
}

inline void check_scenario(const QuorumSystem& qs, const Scenario& sc) {
  for (const auto& e : sc.events)
    if (!qs.contains(e.node)) throw InvalidScenario("event for unknown node " + std::to_string(to_int(e.node)));
  if (sc.delivery_script)
    for (auto [s, d] : *sc.delivery_script)
      if (!qs.contains(s) || !qs.contains(d))
        throw InvalidScenario("delivery script names unknown channel " + std::to_string(to_int(s)) + "->" +
                              std::to_string(to_int(d)));
  if (const auto* u = std::get_if<UniformRandomDelay>(&sc.delay); u && (u->lo < 1 || u->hi < u->lo))
    throw InvalidScenario("uniform_random delay needs 1 <= lo <= hi");
  if (const auto* f = std::get_if<FixedDelay>(&sc.delay)) {
    if (f->fallback < 1) throw InvalidScenario("fixed delays must be at least one tick");
    for (const auto& [c, t] : f->per_channel)
      if (t < 1) throw InvalidScenario("fixed delays must be at least one tick");
  }
  if (sc.cs_duration < 1) throw InvalidScenario("cs_duration must be at least one tick");
  auto r = validate(qs);
  if (!r.cond1_pairwise_intersection.pass || !r.cond2_self_membership.pass)
    throw InvalidScenario("quorum system violates pairwise intersection or self-membership");
}

// ------------------------------------------------------------------- trace

enum class TraceKind : std::uint8_t { Send, Deliver, StateChange, CsEnter, CsExit };

constexpr std::string_view to_string(TraceKind k) noexcept {
  switch (k) {
    case TraceKind::Send: return "send";
    case TraceKind::Deliver: return "deliver";
    case TraceKind::StateChange: return "state_change";
    case TraceKind::CsEnter: return "cs_enter";
    case TraceKind::CsExit: return "cs_exit";
  }
  return "?";
}

struct TraceRecord {
  Tick tick = 0;
  TraceKind kind = TraceKind::Send;
  std::optional<ProcessId> src;
  std::optional<ProcessId> dst;
  nlohmann::ordered_json msg;     // null unless send/deliver
  std::optional<ProcessId> node;
  nlohmann::ordered_json detail;  // null or object
};

using Trace = std::vector<TraceRecord>;

inline nlohmann::ordered_json record_json(const TraceRecord& r) {
  auto opt = [](const std::optional<ProcessId>& p) {
    return p ? nlohmann::ordered_json(to_int(*p)) : nlohmann::ordered_json();
  };
  nlohmann::ordered_json j;
  j["tick"] = r.tick;
  j["kind"] = std::string(to_string(r.kind));
  j["src"] = opt(r.src);
  j["dst"] = opt(r.dst);
  j["msg"] = r.msg;
  j["node"] = opt(r.node);
  j["detail"] = r.detail;
  return j;
}

inline void write_trace_jsonl(std::ostream& out, const Trace& trace) {
  for (const auto& r : trace) out << record_json(r).dump() << '\n';
}

// ------------------------------------------------------------------- stats

struct RequestStats {
  ProcessId origin{};
  Tick request_tick = 0;
  std::optional<Tick> cs_enter_tick;
  std::optional<Tick> cs_exit_tick;
  std::size_t messages_attributed = 0;
  std::size_t max_wait_queue = 0;

  std::optional<Tick> wait_ticks() const {
    if (!cs_enter_tick) return std::nullopt;
    return *cs_enter_tick - request_tick;
  }
};

struct RunStats {
  std::vector<RequestStats> requests;  // in injection order
  std::map<std::string, std::size_t> messages_by_kind;
  std::size_t total_messages = 0;
  std::size_t max_queue_len = 0;

  std::optional<Tick> max_wait() const {
    std::optional<Tick> m;
    for (const auto& r : requests)
      if (auto w = r.wait_ticks()) m = m ? std::max(*m, *w) : *w;
    return m;
  }
};

// The request a network message serves: ring messages name it directly;
// Maekawa replies (LOCKED, FAILED, INQUIRE) serve their destination.
inline ProcessId attributed_to(const TraceRecord& r) {
  const auto kind = r.msg.at("kind").get<std::string>();
  if (kind == "LOCKED" || kind == "FAILED" || kind == "INQUIRE") return *r.dst;
  if (kind == "REQUEST" || kind == "RELEASE" || kind == "RELINQUISH") return *r.src;
  return pid(r.msg.at("origin").get<int>());
}

// A request owns every send attributed to its origin from its injection up
// to the origin's next injection (which includes its release broadcast).
inline RunStats collect_stats(const Trace& trace) {
  RunStats stats;
  struct Open {
    std::size_t index;
    std::size_t end;
  };
  std::vector<Open> spans;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    if (r.kind == TraceKind::Send) {
      ++stats.total_messages;
      ++stats.messages_by_kind[r.msg.at("kind").get<std::string>()];
    }
    if (r.kind == TraceKind::StateChange) {
      stats.max_queue_len = std::max(stats.max_queue_len, r.detail.at("queue_len").get<std::size_t>());
      if (r.detail.at("event") == "request") {
        for (std::size_t s = 0; s < spans.size(); ++s)
          if (stats.requests[s].origin == *r.node && spans[s].end == trace.size()) spans[s].end = i;
        stats.requests.push_back({*r.node, r.tick, std::nullopt, std::nullopt, 0, 0});
        spans.push_back({i, trace.size()});
      }
    }
  }
  for (std::size_t s = 0; s < spans.size(); ++s) {
    auto& req = stats.requests[s];
    bool waiting = true;
    for (std::size_t i = spans[s].index; i < spans[s].end; ++i) {
      const auto& r = trace[i];
      if (r.kind == TraceKind::Send && attributed_to(r) == req.origin) ++req.messages_attributed;
      if (r.kind == TraceKind::StateChange && waiting)
        req.max_wait_queue = std::max(req.max_wait_queue, r.detail.at("queue_len").get<std::size_t>());
      if (r.kind == TraceKind::CsEnter && r.node == req.origin && !req.cs_enter_tick) {
        req.cs_enter_tick = r.tick;
        waiting = false;
      }
      if (r.kind == TraceKind::CsExit && r.node == req.origin && !req.cs_exit_tick) req.cs_exit_tick = r.tick;
    }
  }
  return stats;
}

inline void write_stats_csv(std::ostream& out, const RunStats& stats) {
  out << "origin,request_tick,cs_enter_tick,cs_exit_tick,messages_attributed,max_wait_queue\n";
  auto opt = [](const std::optional<Tick>& t) { return t ? std::to_string(*t) : std::string(); };
  for (const auto& r : stats.requests)
    out << to_int(r.origin) << ',' << r.request_tick << ',' << opt(r.cs_enter_tick) << ',' << opt(r.cs_exit_tick)
        << ',' << r.messages_attributed << ',' << r.max_wait_queue << '\n';
}

// Upper bound on request-to-entry delay under the unit-delay model:
// kBoundedDelayFactor * k * concurrent_requests * cs_duration ticks. Each
// request ahead of ours costs one CS plus at most ~2k hops of forwarding,
// which stays within 3 * k * cs_duration for k, cs_duration >= 1.
inline constexpr Tick kBoundedDelayFactor = 3;

inline Tick bounded_delay_limit(int k, std::size_t concurrent, Tick cs_duration) {
  return kBoundedDelayFactor * static_cast<Tick>(k) * static_cast<Tick>(concurrent) * cs_duration;
}

// ------------------------------------------------------------------- world

enum class Outcome : std::uint8_t { Quiescent, QuiescenceWithWaiters, StepLimitExceeded, SafetyViolation };

constexpr std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::Quiescent: return "quiescent";
    case Outcome::QuiescenceWithWaiters: return "quiescence_with_waiters";
    case Outcome::StepLimitExceeded: return "step_limit_exceeded";
    case Outcome::SafetyViolation: return "safety_violation";
  }
  return "?";
}

struct WorldOptions {
  Tick cs_duration = 1;
  DelayModel delay = UnitDelay{};
  bool count_self_messages = false;
  bool record_trace = true;
  // Schedule a release cs_duration ticks after every CS entry. The explorer
  // turns this off and issues releases itself.
  bool auto_release = true;
};

template <Protocol P>
class SimWorld {
 public:
  using State = typename P::State;
  using Message = typename P::Message;

  struct InFlight {
    Tick deliver_at = 0;
    Message msg;
  };

  SimWorld(const QuorumSystem& qs, P proto, WorldOptions opts)
      : qs_(&qs), proto_(std::move(proto)), opts_(std::move(opts)) {
    for (ProcessId p : qs.processes()) nodes_.push_back(proto_.init(qs, p));
    if (const auto* u = std::get_if<UniformRandomDelay>(&opts_.delay)) rng_.seed(u->seed);
  }

  // ---- scenario plumbing

  void schedule_request(Tick at, ProcessId node) { push_event(at, EventKind::Request, node); }

  void set_script(std::vector<Channel> script) {
    script_ = std::move(script);
    script_pos_ = 0;
  }

  bool quiescent() const { return events_.empty() && channels_.empty(); }

  // Applies the next event. Returns false when there is nothing left to do.
  bool step() {
    if (quiescent()) return false;
    if (script_pos_ < script_.size()) return scripted_step();

    std::optional<std::pair<Tick, Channel>> delivery;
    for (const auto& [ch, q] : channels_) {
      Tick t = std::max(q.front().deliver_at, time_);
      if (!delivery || t < delivery->first) delivery = {t, ch};
    }
    if (!events_.empty() && (!delivery || events_.begin()->first.at <= delivery->first)) {
      fire_next_event();
      return true;
    }
    time_ = delivery->first;
    deliver(delivery->second.first, delivery->second.second);
    return true;
  }

  // ---- direct transitions (explorer / replay)

  void inject_request(ProcessId node) { apply(node, proto_.request(*qs_, state(node)), "request"); }

  void release(ProcessId node) {
    if (opts_.record_trace) trace_.push_back({time_, TraceKind::CsExit, std::nullopt, std::nullopt, nullptr, node, nullptr});
    apply(node, proto_.release(*qs_, state(node)), "release");
  }

  bool can_deliver(ProcessId src, ProcessId dst) const { return channels_.contains({src, dst}); }

  void deliver(ProcessId src, ProcessId dst) {
    auto it = channels_.find({src, dst});
    if (it == channels_.end())
      throw InvalidScenario("no message in flight on " + std::to_string(to_int(src)) + "->" +
                            std::to_string(to_int(dst)));
    Message msg = std::move(it->second.front().msg);
    it->second.pop_front();
    if (it->second.empty()) channels_.erase(it);
    if (opts_.record_trace)
      trace_.push_back({time_, TraceKind::Deliver, src, dst, P::message_json(msg), std::nullopt, nullptr});
    apply(dst, proto_.receive(*qs_, state(dst), src, msg), "receive");
  }

  // ---- observers

  Tick time() const { return time_; }
  const QuorumSystem& quorums() const { return *qs_; }
  const State& state(ProcessId p) const { return nodes_.at(static_cast<std::size_t>(to_int(p) - 1)); }
  const std::vector<State>& nodes() const { return nodes_; }
  const std::map<Channel, std::deque<InFlight>>& channels() const { return channels_; }
  const Trace& trace() const { return trace_; }
  Trace take_trace() { return std::move(trace_); }
  const std::optional<std::string>& violation() const { return violation_; }

  std::size_t ready_count() const {
    std::size_t c = 0;
    for (const auto& s : nodes_) c += P::stat(s) == Stat::Ready;
    return c;
  }

  bool has_waiters() const {
    for (const auto& s : nodes_)
      if (P::stat(s) == Stat::Wait) return true;
    return false;
  }

  std::vector<WaitEdge> wait_edges() const {
    std::vector<WaitEdge> all;
    for (const auto& s : nodes_) {
      auto e = P::wait_edges(s);
      all.insert(all.end(), e.begin(), e.end());
    }
    return all;
  }

  // Node states and channel contents; ticks and delivery times excluded.
  std::string canonical_key() const {
    std::string key;
    key.reserve(64 * nodes_.size());
    for (const auto& s : nodes_) P::encode_state(key, s);
    key.push_back('|');
    for (const auto& [ch, q] : channels_) {
      encode::put(key, ch.first);
      encode::put(key, ch.second);
      encode::put(key, q.size());
      for (const auto& m : q) P::encode_message(key, m.msg);
    }
    return key;
  }

 private:
  enum class EventKind : std::uint8_t { Request, Release };
  struct EventKey {
    Tick at;
    std::uint64_t seq;
    friend auto operator<=>(const EventKey&, const EventKey&) = default;
  };
  struct Event {
    EventKind kind;
    ProcessId node;
  };

  State& mutable_state(ProcessId p) { return nodes_.at(static_cast<std::size_t>(to_int(p) - 1)); }

  void push_event(Tick at, EventKind kind, ProcessId node) { events_.emplace(EventKey{at, next_seq_++}, Event{kind, node}); }

  void fire_next_event() {
    auto it = events_.begin();
    time_ = std::max(time_, it->first.at);
    Event ev = it->second;
    events_.erase(it);
    if (ev.kind == EventKind::Request)
      inject_request(ev.node);
    else
      release(ev.node);
  }

  bool scripted_step() {
    auto [src, dst] = script_[script_pos_];
    const Tick next = time_ + 1;
    if (!events_.empty() && events_.begin()->first.at <= next) {
      fire_next_event();
      return true;
    }
    if (can_deliver(src, dst)) {
      time_ = next;
      ++script_pos_;
      deliver(src, dst);
      return true;
    }
    if (!events_.empty()) {
      fire_next_event();
      return true;
    }
    throw InvalidScenario("delivery script step " + std::to_string(script_pos_) + ": channel " +
                          std::to_string(to_int(src)) + "->" + std::to_string(to_int(dst)) + " is empty");
  }

  Tick delay_for(ProcessId src, ProcessId dst) {
    return std::visit(
        [&](auto& m) -> Tick {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, UnitDelay>) {
            return 1;
          } else if constexpr (std::is_same_v<M, FixedDelay>) {
            auto it = m.per_channel.find({src, dst});
            return it == m.per_channel.end() ? m.fallback : it->second;
          } else {
            std::uniform_int_distribution<Tick> dist(m.lo, m.hi);
            return dist(rng_);
          }
        },
        opts_.delay);
  }

  template <class Step>
  void apply(ProcessId node, Step step, std::string_view event) {
    const Stat before = P::stat(state(node));
    std::vector<Outgoing<Message>> network;
    State next;
    if (opts_.count_self_messages) {
      next = std::move(step.state);
      network = std::move(step.outbox);
    } else {
      auto settled = settle_local(proto_, *qs_, std::move(step));
      next = std::move(settled.state);
      network = std::move(settled.network);
    }
    const bool changed = !(next == state(node));
    mutable_state(node) = std::move(next);
    const State& now = state(node);

    if (opts_.record_trace && (changed || event == "request")) {
      nlohmann::ordered_json detail;
      detail["event"] = std::string(event);
      detail["queue_len"] = P::queue_len(now);
      detail["state"] = P::state_json(now);
      trace_.push_back({time_, TraceKind::StateChange, std::nullopt, std::nullopt, nullptr, node, std::move(detail)});
    }
    if (before != Stat::Ready && P::stat(now) == Stat::Ready) {
      if (opts_.record_trace) trace_.push_back({time_, TraceKind::CsEnter, std::nullopt, std::nullopt, nullptr, node, nullptr});
      if (opts_.auto_release) push_event(time_ + opts_.cs_duration, EventKind::Release, node);
    }
    for (auto& o : network) {
      if (opts_.record_trace)
        trace_.push_back({time_, TraceKind::Send, node, o.to, P::message_json(o.msg), std::nullopt, nullptr});
      auto& q = channels_[{node, o.to}];
      Tick at = time_ + delay_for(node, o.to);
      if (!q.empty()) at = std::max(at, q.back().deliver_at);
      q.push_back({at, std::move(o.msg)});
    }

    if (!violation_) {
      if (ready_count() > 1) violation_ = "more than one process in the critical section";
      else if (auto bad = P::check(*qs_, now)) violation_ = *bad;
    }
  }

  const QuorumSystem* qs_;
  P proto_;
  WorldOptions opts_;
  Tick time_ = 0;
  std::vector<State> nodes_;
  std::map<Channel, std::deque<InFlight>> channels_;
  std::map<EventKey, Event> events_;
  std::uint64_t next_seq_ = 0;
  std::mt19937_64 rng_;
  std::vector<Channel> script_;
  std::size_t script_pos_ = 0;
  Trace trace_;
  std::optional<std::string> violation_;
};

// -------------------------------------------------------------------- run

struct RunResult {
  Outcome outcome = Outcome::Quiescent;
  Trace trace;
  RunStats stats;
  std::vector<WaitEdge> wait_edges;  // at the final state
  std::vector<WaitEdge> cycle;       // waiter -> holder cycle, if any
  std::string diagnostic;
  std::uint64_t steps = 0;
};

// Observer hook: called after every step with the world.
template <Protocol P, class Observer>
RunResult run_world(SimWorld<P>& world, std::uint64_t max_steps, Observer&& observe) {
  RunResult res;
  while (true) {
    if (world.violation()) {
      res.outcome = Outcome::SafetyViolation;
      res.diagnostic = *world.violation();
      break;
    }
    if (world.quiescent()) {
      res.outcome = world.has_waiters() ? Outcome::QuiescenceWithWaiters : Outcome::Quiescent;
      break;
    }
    if (res.steps >= max_steps) {
      res.outcome = Outcome::StepLimitExceeded;
      res.diagnostic = "step limit " + std::to_string(max_steps) + " reached";
      break;
    }
    world.step();
    ++res.steps;
    observe(world);
  }
  res.wait_edges = world.wait_edges();
  res.cycle = find_wait_cycle(res.wait_edges);
  res.trace = world.take_trace();
  res.stats = collect_stats(res.trace);
  return res;
}

inline WorldOptions world_options(const Scenario& sc) {
  WorldOptions o;
  o.cs_duration = sc.cs_duration;
  o.delay = sc.delay;
  o.count_self_messages = sc.count_self_messages;
  return o;
}

template <Protocol P>
SimWorld<P> make_world(const QuorumSystem& qs, const Scenario& sc, P proto, bool record_trace = true) {
  auto opts = world_options(sc);
  opts.record_trace = record_trace;
  SimWorld<P> world(qs, std::move(proto), opts);
  for (const auto& e : sc.events) world.schedule_request(e.at, e.node);
  if (sc.delivery_script) world.set_script(*sc.delivery_script);
  return world;
}

// Calls f with the protocol adaptor matching `algo`.
template <class F>
decltype(auto) with_protocol(Algo algo, F&& f) {
  switch (algo) {
    case Algo::Ring: return f(RingProtocol{});
    case Algo::MaekawaBasic: return f(MaekawaProtocol{MaekawaMode::Basic});
    case Algo::MaekawaFull: return f(MaekawaProtocol{MaekawaMode::Full});
  }
  throw InvalidScenario("unknown algorithm");
}

inline RunResult run(const QuorumSystem& qs, const Scenario& sc) {
  check_scenario(qs, sc);
  return with_protocol(sc.algo, [&](auto proto) {
    auto world = make_world(qs, sc, proto);
    return run_world(world, sc.max_steps, [](const auto&) {});
  });
}

inline RunResult run(const Scenario& sc) { return run(load_quorum_file(sc.quorum_file), sc); }

}  // namespace ringmx
