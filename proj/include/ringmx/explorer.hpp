#pragma once

// Bounded exhaustive exploration of delivery interleavings.
//
// All requesters inject their request in the initial state. From there the
// only nondeterminism is which channel delivers next (its head message, so
// FIFO holds) and when a node inside the critical section releases it.
// Every reachable state is checked for mutual exclusion and local node
// invariants; a state with no enabled transition and some node still
// waiting is a deadlock.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ringmx/simnet.hpp"

namespace ringmx {

struct ExploreStep {
  enum class Kind : std::uint8_t { Deliver, Release };
  Kind kind = Kind::Deliver;
  ProcessId src{};
  ProcessId dst{};  // equals src for a release

  friend bool operator==(const ExploreStep&, const ExploreStep&) = default;
};

using Counterexample = std::vector<ExploreStep>;

struct ExploreConfig {
  QuorumSystem quorums;
  Algo algo = Algo::Ring;
  std::vector<ProcessId> requesters;
  std::uint64_t depth_bound = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t state_bound = 5'000'000;
  // Keep searching after the first deadlock, collecting up to this many
  // distinct wait-for cycles.
  std::size_t max_deadlocks = 16;
};

struct DeadlockFinding {
  Counterexample counterexample;
  std::vector<WaitEdge> wait_edges;
  std::vector<WaitEdge> cycle;
};

struct Verdict {
  struct SafetyViolation {
    Counterexample counterexample;
    std::string description;
  };

  std::optional<SafetyViolation> safety;    // nullopt = ok
  std::vector<DeadlockFinding> deadlocks;   // empty = none found; [0] is the first found
  std::uint64_t states_visited = 0;
  std::uint64_t max_depth = 0;
  bool frontier_truncated = false;

  bool safe() const noexcept { return !safety.has_value(); }
  bool deadlock_found() const noexcept { return !deadlocks.empty(); }
};

namespace explore_detail {

template <Protocol P>
class Search {
 public:
  Search(const ExploreConfig& cfg, Verdict& verdict) : cfg_(cfg), verdict_(verdict) {}

  void run(const SimWorld<P>& initial) { visit(initial, 0); }

  std::unordered_map<std::string, std::uint64_t> take_visited_depths() {
    std::unordered_map<std::string, std::uint64_t> out;
    for (auto& [k, v] : visited_) out.emplace(k, v.depth);
    return out;
  }

 private:
  struct Seen {
    std::uint64_t depth;
    bool complete;
  };

  static std::vector<ExploreStep> enabled(const SimWorld<P>& w) {
    std::vector<ExploreStep> out;
    for (const auto& [ch, q] : w.channels()) out.push_back({ExploreStep::Kind::Deliver, ch.first, ch.second});
    for (const auto& s : w.nodes())
      if (P::stat(s) == Stat::Ready) out.push_back({ExploreStep::Kind::Release, P::id_of(s), P::id_of(s)});
    return out;
  }

  bool stop() const { return verdict_.safety.has_value(); }

  // Returns true when the subtree below this state was fully explored.
  bool visit(const SimWorld<P>& w, std::uint64_t depth) {
    if (stop()) return true;
    auto key = w.canonical_key();
    Seen* seen = nullptr;
    if (auto it = visited_.find(key); it != visited_.end()) {
      if (it->second.complete || depth >= it->second.depth) return it->second.complete;
      it->second.depth = depth;
      seen = &it->second;
    } else {
      if (visited_.size() >= cfg_.state_bound) {
        verdict_.frontier_truncated = true;
        return false;
      }
      // element references survive rehashing
      seen = &visited_.emplace(std::move(key), Seen{depth, false}).first->second;
      verdict_.states_visited = visited_.size();
    }
    verdict_.max_depth = std::max(verdict_.max_depth, depth);

    if (w.violation()) {
      verdict_.safety = Verdict::SafetyViolation{path_, *w.violation()};
      return true;
    }

    auto steps = enabled(w);
    if (steps.empty()) {
      if (w.has_waiters()) record_deadlock(w);
      seen->complete = true;
      return true;
    }
    if (depth >= cfg_.depth_bound) {
      verdict_.frontier_truncated = true;
      return false;
    }

    bool complete = true;
    for (const auto& st : steps) {
      SimWorld<P> next = w;
      path_.push_back(st);
      try {
        if (st.kind == ExploreStep::Kind::Deliver)
          next.deliver(st.src, st.dst);
        else
          next.release(st.src);
      } catch (const Error& e) {
        verdict_.safety = Verdict::SafetyViolation{path_, std::string("protocol error: ") + e.what()};
        path_.pop_back();
        return true;
      }
      complete = visit(next, depth + 1) && complete;
      path_.pop_back();
      if (stop()) return true;
    }
    seen->complete = complete;
    return complete;
  }

  void record_deadlock(const SimWorld<P>& w) {
    auto edges = w.wait_edges();
    auto cycle = find_wait_cycle(edges);
    for (const auto& d : verdict_.deadlocks)
      if (d.cycle == cycle && (!cycle.empty() || d.wait_edges == edges)) return;
    if (verdict_.deadlocks.size() >= cfg_.max_deadlocks) return;
    verdict_.deadlocks.push_back({path_, std::move(edges), std::move(cycle)});
  }

  const ExploreConfig& cfg_;
  Verdict& verdict_;
  std::unordered_map<std::string, Seen> visited_;
  Counterexample path_;
};

template <Protocol P>
SimWorld<P> initial_world(const ExploreConfig& cfg, P proto, bool record_trace) {
  WorldOptions opts;
  opts.record_trace = record_trace;
  opts.auto_release = false;
  SimWorld<P> w(cfg.quorums, std::move(proto), opts);
  auto requesters = cfg.requesters;
  std::sort(requesters.begin(), requesters.end());
  for (ProcessId p : requesters) w.inject_request(p);
  return w;
}

inline void check_config(const ExploreConfig& cfg) {
  if (cfg.depth_bound == 0 || cfg.state_bound == 0) throw InvalidScenario("explore bounds must be positive");
  auto r = validate(cfg.quorums);
  if (!r.cond1_pairwise_intersection.pass || !r.cond2_self_membership.pass)
    throw InvalidScenario("quorum system violates pairwise intersection or self-membership");
  std::set<ProcessId> seen;
  for (ProcessId p : cfg.requesters) {
    if (!cfg.quorums.contains(p)) throw InvalidScenario("unknown requester " + std::to_string(to_int(p)));
    if (!seen.insert(p).second) throw InvalidScenario("duplicate requester " + std::to_string(to_int(p)));
  }
}

}  // namespace explore_detail

inline Verdict explore(const ExploreConfig& cfg) {
  explore_detail::check_config(cfg);
  Verdict verdict;
  with_protocol(cfg.algo, [&](auto proto) {
    using P = decltype(proto);
    explore_detail::Search<P> search(cfg, verdict);
    search.run(explore_detail::initial_world(cfg, proto, false));
  });
  return verdict;
}

// Same search, also returning every visited canonical state key (used to
// cross-check simulator runs against the explored graph).
inline std::pair<Verdict, std::unordered_map<std::string, std::uint64_t>> explore_with_states(const ExploreConfig& cfg) {
  explore_detail::check_config(cfg);
  Verdict verdict;
  std::unordered_map<std::string, std::uint64_t> states;
  with_protocol(cfg.algo, [&](auto proto) {
    using P = decltype(proto);
    explore_detail::Search<P> search(cfg, verdict);
    search.run(explore_detail::initial_world(cfg, proto, false));
    states = search.take_visited_depths();
  });
  return {std::move(verdict), std::move(states)};
}

struct ReplayResult {
  Trace trace;
  std::size_t ready_count = 0;
  std::optional<std::string> violation;
  bool quiescent_with_waiters = false;
  std::vector<WaitEdge> wait_edges;
  std::vector<WaitEdge> cycle;
};

// Re-executes a step sequence through the simulator with tracing on.
inline ReplayResult replay(const ExploreConfig& cfg, const Counterexample& steps) {
  explore_detail::check_config(cfg);
  ReplayResult out;
  with_protocol(cfg.algo, [&](auto proto) {
    auto w = explore_detail::initial_world(cfg, proto, true);
    std::size_t i = 0;
    for (const auto& st : steps) {
      if (st.kind == ExploreStep::Kind::Deliver) {
        if (!w.can_deliver(st.src, st.dst))
          throw ReplayDivergence("step " + std::to_string(i) + ": nothing in flight on " +
                                 std::to_string(to_int(st.src)) + "->" + std::to_string(to_int(st.dst)));
        w.deliver(st.src, st.dst);
      } else {
        if (decltype(proto)::stat(w.state(st.src)) != Stat::Ready)
          throw ReplayDivergence("step " + std::to_string(i) + ": node " + std::to_string(to_int(st.src)) +
                                 " is not in the critical section");
        w.release(st.src);
      }
      ++i;
    }
    out.ready_count = w.ready_count();
    out.violation = w.violation();
    bool any_ready = out.ready_count > 0;
    out.quiescent_with_waiters = w.channels().empty() && !any_ready && w.has_waiters();
    out.wait_edges = w.wait_edges();
    out.cycle = find_wait_cycle(out.wait_edges);
    out.trace = w.take_trace();
  });
  return out;
}

// ------------------------------------------------------------ serialization

inline nlohmann::ordered_json steps_json(const Counterexample& steps) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : steps) {
    nlohmann::ordered_json j;
    j["src"] = to_int(s.src);
    j["dst"] = to_int(s.dst);
    if (s.kind == ExploreStep::Kind::Release) j["release"] = true;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline Counterexample steps_from_json(const nlohmann::json& arr) {
  Counterexample out;
  for (const auto& j : arr) {
    ExploreStep s;
    s.src = pid(j.at("src").get<int>());
    s.dst = pid(j.at("dst").get<int>());
    s.kind = j.value("release", false) ? ExploreStep::Kind::Release : ExploreStep::Kind::Deliver;
    out.push_back(s);
  }
  return out;
}

inline nlohmann::ordered_json edges_json(const std::vector<WaitEdge>& edges) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : edges) {
    nlohmann::ordered_json j;
    j["waiter"] = to_int(e.waiter);
    j["at"] = to_int(e.at);
    j["holder"] = to_int(e.holder);
    arr.push_back(std::move(j));
  }
  return arr;
}

// "2->8, 9->11, 13->4": waiter -> node it is parked at.
inline std::string describe_cycle(const std::vector<WaitEdge>& cycle) {
  std::string s;
  for (const auto& e : cycle) {
    if (!s.empty()) s += ", ";
    s += std::to_string(to_int(e.waiter)) + "->" + std::to_string(to_int(e.at));
  }
  return s;
}

inline nlohmann::ordered_json verdict_json(const ExploreConfig& cfg, const Verdict& v) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json c;
  c["quorums"] = quorum_to_json(cfg.quorums);
  c["algo"] = std::string(to_string(cfg.algo));
  auto req = nlohmann::ordered_json::array();
  for (ProcessId p : cfg.requesters) req.push_back(to_int(p));
  c["requesters"] = std::move(req);
  c["depth_bound"] = cfg.depth_bound;
  c["state_bound"] = cfg.state_bound;
  j["config"] = std::move(c);

  nlohmann::ordered_json safety;
  safety["status"] = v.safe() ? "ok" : "violated";
  if (v.safety) {
    safety["description"] = v.safety->description;
    safety["counterexample"] = steps_json(v.safety->counterexample);
  }
  j["safety"] = std::move(safety);

  nlohmann::ordered_json dl;
  dl["status"] = v.deadlock_found() ? "found" : "none_found";
  auto found = nlohmann::ordered_json::array();
  for (const auto& d : v.deadlocks) {
    nlohmann::ordered_json f;
    f["cycle"] = describe_cycle(d.cycle);
    f["wait_for_cycle"] = edges_json(d.cycle);
    f["wait_for_edges"] = edges_json(d.wait_edges);
    f["counterexample"] = steps_json(d.counterexample);
    found.push_back(std::move(f));
  }
  dl["findings"] = std::move(found);
  j["deadlock"] = std::move(dl);
  j["states_visited"] = v.states_visited;
  j["max_depth"] = v.max_depth;
  j["frontier_truncated"] = v.frontier_truncated;
  j["exhaustive"] = !v.frontier_truncated;
  return j;
}

inline ExploreConfig config_from_verdict_json(const nlohmann::json& j) {
  const auto& c = j.at("config");
  ExploreConfig cfg;
  cfg.quorums = quorum_from_json(c.at("quorums"));
  cfg.algo = parse_algo(c.at("algo").get<std::string>());
  for (const auto& p : c.at("requesters")) cfg.requesters.push_back(pid(p.get<int>()));
  cfg.depth_bound = c.at("depth_bound").get<std::uint64_t>();
  cfg.state_bound = c.at("state_bound").get<std::uint64_t>();
  return cfg;
}

}  // namespace ringmx
