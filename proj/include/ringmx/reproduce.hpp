#pragma once

// Bundled reference fixtures (published quorum tables, the scripted
// worked-example scenarios) and the one-shot reproductions that compare a
// run against the golden expectations shipped next to them.

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringmx/explorer.hpp"
#include "ringmx/simnet.hpp"

namespace ringmx {

struct FixtureSet {
  std::filesystem::path dir;
  QuorumSystem s3_n3;   // ring-algorithm table, n = 3
  QuorumSystem s3_n7;   // ring-algorithm table, n = 7
  QuorumSystem s3_n13;  // ring-algorithm table, n = 13
  QuorumSystem s2_n13;  // Maekawa example table, n = 13
  std::map<std::string, Scenario> scenarios;  // keyed by replay name
};

inline const std::vector<std::string>& replay_names() {
  static const std::vector<std::string> names{"section3b", "fig4-basic", "fig4-full", "single-request"};
  return names;
}

inline std::string scenario_file_for(const std::string& name) {
  std::string stem = name;
  std::replace(stem.begin(), stem.end(), '-', '_');
  return "scenario_" + stem + ".json";
}

// Loads and validates every bundled fixture; any failure throws.
inline FixtureSet load_fixtures(const std::filesystem::path& dir) {
  FixtureSet f;
  f.dir = dir;
  auto load = [&](const char* file) {
    auto qs = load_quorum_file(dir / file);
    auto r = validate(qs);
    if (!r.all_pass()) throw MalformedQuorum(std::string("fixture ") + file + " fails validation");
    return qs;
  };
  f.s3_n3 = load("quorums_s3_n3.json");
  f.s3_n7 = load("quorums_s3_n7.json");
  f.s3_n13 = load("quorums_s3.json");
  f.s2_n13 = load("quorums_s2.json");
  for (const auto& name : replay_names()) {
    auto sc = load_scenario_file(dir / scenario_file_for(name));
    check_scenario(load_quorum_file(sc.quorum_file), sc);
    f.scenarios.emplace(name, std::move(sc));
  }
  return f;
}

// node -> {stat, queue, blocked}; the normalized view golden tables compare.
using Snapshot = nlohmann::ordered_json;

inline Snapshot ring_snapshot(const std::vector<RingNodeState>& nodes) {
  Snapshot s = Snapshot::object();
  for (const auto& n : nodes) {
    Snapshot e;
    e["stat"] = std::string(to_string(n.stat));
    auto q = Snapshot::array();
    for (ProcessId p : n.queue) q.push_back(to_int(p));
    e["queue"] = std::move(q);
    e["blocked"] = n.blocked;
    s[std::to_string(to_int(n.id))] = std::move(e);
  }
  return s;
}

struct Reproduction {
  std::string name;
  bool pass = false;
  std::vector<std::string> mismatches;
  RunResult run;
  nlohmann::ordered_json report;
};

namespace reproduce_detail {

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  return nlohmann::json::parse(in);
}

inline void compare_snapshot(const std::string& label, const Snapshot& got, const nlohmann::json& want,
                             std::vector<std::string>& mismatches) {
  for (const auto& [node, expected] : want.items()) {
    if (!got.contains(node)) {
      mismatches.push_back(label + ": node " + node + " missing");
      continue;
    }
    for (const auto& [field, value] : expected.items()) {
      const auto& actual = got.at(node).at(field);
      if (nlohmann::json::parse(actual.dump()) != value)
        mismatches.push_back(label + ": node " + node + " " + field + " = " + actual.dump() + ", expected " +
                             value.dump());
    }
  }
}

inline std::set<std::pair<int, int>> cycle_pairs(const std::vector<WaitEdge>& cycle) {
  std::set<std::pair<int, int>> out;
  for (const auto& e : cycle) out.emplace(to_int(e.waiter), to_int(e.at));
  return out;
}

inline std::set<int> entered(const Trace& trace) {
  std::set<int> out;
  for (const auto& r : trace)
    if (r.kind == TraceKind::CsEnter) out.insert(to_int(*r.node));
  return out;
}

}  // namespace reproduce_detail

// Runs one bundled reproduction and checks it against its golden file.
inline Reproduction reproduce(const FixtureSet& fx, const std::string& name) {
  using namespace reproduce_detail;
  auto sit = fx.scenarios.find(name);
  if (sit == fx.scenarios.end()) throw InvalidScenario("unknown reproduction \"" + name + "\"");
  const Scenario& sc = sit->second;
  const QuorumSystem qs = load_quorum_file(sc.quorum_file);
  check_scenario(qs, sc);

  Reproduction out;
  out.name = name;
  out.report["name"] = name;

  if (name == "section3b") {
    auto golden = read_json(fx.dir / "golden_section3b.json");
    std::map<int, std::string> capture_at;  // node entering the CS -> snapshot label
    for (const auto& [label, spec] : golden.at("snapshots").items())
      capture_at[spec.at("at_cs_enter_of").get<int>()] = label;
    std::map<std::string, Snapshot> snaps;
    auto world = make_world(qs, sc, RingProtocol{});
    std::size_t seen = 0;
    out.run = run_world(world, sc.max_steps, [&](const SimWorld<RingProtocol>& w) {
      const auto& t = w.trace();
      for (; seen < t.size(); ++seen)
        if (t[seen].kind == TraceKind::CsEnter)
          if (auto c = capture_at.find(to_int(*t[seen].node)); c != capture_at.end() && !snaps.contains(c->second))
            snaps[c->second] = ring_snapshot(w.nodes());
    });
    for (const auto& [label, spec] : golden.at("snapshots").items()) {
      if (!snaps.contains(label)) {
        out.mismatches.push_back(label + ": snapshot never taken");
        continue;
      }
      compare_snapshot(label, snaps[label], spec.at("nodes"), out.mismatches);
      out.report["snapshots"][label] = snaps[label];
    }
    if (out.run.outcome != Outcome::Quiescent)
      out.mismatches.push_back("run ended " + std::string(to_string(out.run.outcome)));
  } else if (name == "fig4-basic" || name == "fig4-full") {
    auto golden = read_json(fx.dir / "golden_fig4.json");
    out.run = run(qs, sc);
    out.report["outcome"] = std::string(to_string(out.run.outcome));
    if (name == "fig4-basic") {
      std::set<std::pair<int, int>> want;
      for (const auto& e : golden.at("basic_cycle")) want.emplace(e.at("waiter").get<int>(), e.at("at").get<int>());
      out.report["cycle"] = describe_cycle(out.run.cycle);
      if (out.run.outcome != Outcome::QuiescenceWithWaiters)
        out.mismatches.push_back("expected quiescence with waiters, got " + std::string(to_string(out.run.outcome)));
      if (cycle_pairs(out.run.cycle) != want)
        out.mismatches.push_back("wait-for cycle is {" + describe_cycle(out.run.cycle) + "}");
    } else {
      auto want = golden.at("full_entered").get<std::set<int>>();
      auto got = entered(out.run.trace);
      out.report["entered"] = got;
      if (out.run.outcome != Outcome::Quiescent)
        out.mismatches.push_back("expected quiescence, got " + std::string(to_string(out.run.outcome)));
      if (got != want) out.mismatches.push_back("entered set differs from golden");
    }
  } else {
    auto golden = read_json(fx.dir / "golden_single_request.json");
    out.run = run(qs, sc);
    const auto want = golden.at("messages_per_cs").get<std::size_t>();
    std::size_t got = out.run.stats.requests.empty() ? 0 : out.run.stats.requests.front().messages_attributed;
    out.report["messages_per_cs"] = got;
    if (out.run.outcome != Outcome::Quiescent || out.run.stats.requests.size() != 1)
      out.mismatches.push_back("expected a single completed request");
    if (got != want)
      out.mismatches.push_back("messages per CS = " + std::to_string(got) + ", expected " + std::to_string(want));
  }

  out.pass = out.mismatches.empty();
  out.report["pass"] = out.pass;
  out.report["mismatches"] = out.mismatches;
  return out;
}

}  // namespace ringmx
