// Acceptance suite: one PASS/FAIL line per criterion. Thresholds are pinned
// below. Also writes results/deadlock-verdict.json and
// results/acceptance-summary.json.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringmx/ringmx.hpp"

namespace fs = std::filesystem;
using namespace ringmx;

namespace {

const fs::path kFixtures = RINGMX_FIXTURE_DIR;
const fs::path kResults = RINGMX_RESULTS_DIR;

// wall-clock limits, seconds
constexpr double kQuorumFixtureLimit = 1.0;
constexpr double kBuildLimit = 10.0;
constexpr double kTraceLimit = 1.0;
constexpr double kDeadlockScenarioLimit = 1.0;
constexpr double kSafetyN3Limit = 60.0;
constexpr double kSafetyN7Limit = 300.0;
constexpr double kStarvationLimit = 120.0;

constexpr std::uint64_t kN7DepthBound = 60;
constexpr int kStarvationRuns = 10'000;
constexpr std::size_t kContentionSlack = 2;  // per-CS bound is 3k + 2

struct Check {
  bool pass = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

nlohmann::ordered_json summary;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3fs", s);
  return buf;
}

std::string trace_text(const Trace& t) {
  std::ostringstream os;
  write_trace_jsonl(os, t);
  return os.str();
}

// ---------------------------------------------------------------- criteria

Check quorum_fixtures() {
  Check o;
  auto t0 = std::chrono::steady_clock::now();
  const auto fx = load_fixtures(kFixtures);
  struct Table {
    const char* name;
    const QuorumSystem* qs;
  };
  for (auto [name, qs] : {Table{"s2_n13", &fx.s2_n13}, Table{"s3_n13", &fx.s3_n13}, Table{"s3_n7", &fx.s3_n7},
                          Table{"s3_n3", &fx.s3_n3}}) {
    auto r = validate(*qs);
    o.require(r.cond1_pairwise_intersection.pass, std::string(name) + " cond1");
    o.require(r.cond2_self_membership.pass, std::string(name) + " cond2");
    summary["quorum_fixtures"][name] = report_to_json(r);
  }
  auto s2 = validate(fx.s2_n13);
  o.require(fx.s2_n13.k() == 4 && s2.cond3_equal_size.pass && s2.cond4_equal_responsibility.pass, "s2_n13 cond3/4");
  auto n7 = validate(fx.s3_n7);
  o.require(fx.s3_n7.k() == 3 && n7.all_pass(), "s3_n7 conditions");
  auto n13 = validate(fx.s3_n13);
  o.require(fx.s3_n13.k() == 4 && n13.cond3_equal_size.pass, "s3_n13 cond3");
  std::string counts;
  for (auto c : n13.cond4_equal_responsibility.counts) counts += std::to_string(c);
  o.note("s3_n13 cond4 counts " + counts);
  double t = seconds_since(t0);
  o.require(t < kQuorumFixtureLimit, "took " + fmt(t));
  o.note(fmt(t));
  return o;
}

Check build_quorum_orders() {
  Check o;
  auto t0 = std::chrono::steady_clock::now();
  for (long n : {1L, 3L, 7L, 13L, 21L, 31L}) {
    try {
      o.require(validate(build_quorums(n)).all_pass(), "n=" + std::to_string(n) + " fails validate");
    } catch (const Error& e) {
      o.require(false, "n=" + std::to_string(n) + ": " + e.what());
    }
  }
  for (long n : {2L, 4L, 5L, 6L}) {
    bool threw = false;
    try {
      build_quorums(n);
    } catch (const NoValidK&) {
      threw = true;
    }
    o.require(threw, "n=" + std::to_string(n) + " did not raise NoValidK");
  }
  double t = seconds_since(t0);
  o.require(t < kBuildLimit, "took " + fmt(t));
  o.note(fmt(t));
  return o;
}

Check state_tables() {
  Check o;
  auto t0 = std::chrono::steady_clock::now();
  auto r = reproduce(load_fixtures(kFixtures), "section3b");
  double t = seconds_since(t0);
  for (const auto& m : r.mismatches) o.require(false, m);
  o.require(t < kTraceLimit, "took " + fmt(t));
  o.note(fmt(t));
  summary["ring_contention_tables"] = r.report;
  return o;
}

Check message_complexity() {
  Check o;
  const auto fx = load_fixtures(kFixtures);
  struct Case {
    const QuorumSystem* qs;
    std::size_t expected;  // 2k - 1
  };
  for (auto [qs, expected] : {Case{&fx.s3_n13, 7}, Case{&fx.s3_n7, 5}, Case{&fx.s3_n3, 3}}) {
    std::set<std::size_t> seen;
    for (ProcessId p : qs->processes()) {
      Scenario sc;
      sc.cs_duration = 5;
      sc.events.push_back({0, p});
      auto r = run(*qs, sc);
      o.require(r.outcome == ringmx::Outcome::Quiescent && r.stats.total_messages == expected,
                "n=" + std::to_string(qs->n()) + " origin " + std::to_string(to_int(p)) + " used " +
                    std::to_string(r.stats.total_messages));
      seen.insert(r.stats.total_messages);
    }
    summary["message_complexity"]["single_requester"][std::to_string(qs->n())] = *seen.begin();
  }
  // the single-request reproduction goes through the golden file as well
  o.require(reproduce(fx, "single-request").pass, "single-request golden");

  Scenario sc;
  sc.cs_duration = 10;
  for (int p : {2, 9, 13}) sc.events.push_back({0, pid(p)});
  auto r = run(fx.s3_n13, sc);
  const std::size_t bound = 3 * static_cast<std::size_t>(fx.s3_n13.k()) + kContentionSlack;
  std::string per;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& q : r.stats.requests) {
    o.require(q.messages_attributed <= bound, "contention origin " + std::to_string(to_int(q.origin)) + " used " +
                                                  std::to_string(q.messages_attributed));
    per += (per.empty() ? "" : ",") + std::to_string(to_int(q.origin)) + ":" + std::to_string(q.messages_attributed);
    rows.push_back({{"origin", to_int(q.origin)},
                    {"messages", q.messages_attributed},
                    {"request_tick", q.request_tick},
                    {"cs_enter_tick", q.cs_enter_tick.value_or(0)}});
  }
  o.require(r.outcome == ringmx::Outcome::Quiescent, "contention run did not finish");
  summary["message_complexity"]["contention"] = {{"bound", bound}, {"requests", rows}};
  o.note("2k-1 = 7/5/3; contention {" + per + "} <= " + std::to_string(bound));
  return o;
}

Check maekawa_deadlock() {
  Check o;
  const auto fx = load_fixtures(kFixtures);
  for (const char* name : {"fig4-basic", "fig4-full"}) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = reproduce(fx, name);
    double t = seconds_since(t0);
    for (const auto& m : r.mismatches) o.require(false, std::string(name) + ": " + m);
    o.require(t < kDeadlockScenarioLimit, std::string(name) + " took " + fmt(t));
    summary["maekawa_deadlock"][name] = r.report;
    if (r.report.contains("cycle")) o.note("basic cycle {" + r.report["cycle"].get<std::string>() + "}");
  }
  return o;
}

struct ExploreRun {
  ExploreConfig cfg;
  Verdict verdict;
  double seconds = 0;
};

ExploreRun run_explorer(ExploreConfig cfg) {
  auto t0 = std::chrono::steady_clock::now();
  ExploreRun r{cfg, explore(cfg), 0};
  r.seconds = seconds_since(t0);
  return r;
}

ExploreConfig n3_config(const FixtureSet& fx) {
  return {fx.s3_n3, Algo::Ring, {pid(1), pid(2), pid(3)}};
}

ExploreConfig n7_config(const FixtureSet& fx) {
  return {fx.s3_n7, Algo::Ring, {pid(1), pid(2), pid(4)}, kN7DepthBound};
}

Check safety() {
  Check o;
  const auto fx = load_fixtures(kFixtures);
  auto n3 = run_explorer(n3_config(fx));
  o.require(n3.verdict.safe(), "n=3: " + (n3.verdict.safety ? n3.verdict.safety->description : ""));
  o.require(!n3.verdict.frontier_truncated, "n=3 search truncated");
  o.require(n3.seconds < kSafetyN3Limit, "n=3 took " + fmt(n3.seconds));
  auto n7 = run_explorer(n7_config(fx));
  o.require(n7.verdict.safe(), "n=7: " + (n7.verdict.safety ? n7.verdict.safety->description : ""));
  o.require(n7.seconds < kSafetyN7Limit, "n=7 took " + fmt(n7.seconds));
  o.note("n=3 " + std::to_string(n3.verdict.states_visited) + " states " + fmt(n3.seconds) + "; n=7 " +
         std::to_string(n7.verdict.states_visited) + " states " + fmt(n7.seconds));
  return o;
}

bool replays(const ExploreConfig& cfg, const Verdict& v, std::string& why) {
  try {
    if (v.safety) {
      auto r = replay(cfg, v.safety->counterexample);
      if (!r.violation) {
        why = "safety counterexample does not reproduce";
        return false;
      }
    }
    for (const auto& d : v.deadlocks) {
      auto r = replay(cfg, d.counterexample);
      if (!r.quiescent_with_waiters || r.cycle != d.cycle) {
        why = "deadlock counterexample does not reproduce";
        return false;
      }
    }
  } catch (const Error& e) {
    why = e.what();
    return false;
  }
  return true;
}

Check deadlock_verdict() {
  Check o;
  const auto fx = load_fixtures(kFixtures);
  nlohmann::ordered_json file;
  std::string brief;
  for (auto [label, cfg] : {std::pair{"n3_exhaustive", n3_config(fx)}, std::pair{"n7_bounded", n7_config(fx)}}) {
    auto first = run_explorer(cfg);
    auto second = run_explorer(cfg);
    auto j = verdict_json(cfg, first.verdict);
    o.require(j.dump() == verdict_json(cfg, second.verdict).dump(), std::string(label) + " verdict not stable");
    std::string why;
    o.require(replays(cfg, first.verdict, why), std::string(label) + ": " + why);
    // the persisted file must replay too
    auto back = config_from_verdict_json(nlohmann::json::parse(j.dump()));
    o.require(back.quorums == cfg.quorums && back.requesters == cfg.requesters, std::string(label) + " config round trip");
    if (std::string(label) == "n3_exhaustive")
      o.require(!first.verdict.frontier_truncated, "n=3 verdict is not definitive");
    file[label] = j;
    brief += std::string(brief.empty() ? "" : "; ") + label + ": " +
             (first.verdict.deadlock_found() ? "deadlock found" : "no deadlock") +
             (first.verdict.frontier_truncated ? " (bounded)" : " (exhaustive)");
  }
  fs::create_directories(kResults);
  std::ofstream(kResults / "deadlock-verdict.json") << file.dump(2) << '\n';
  summary["deadlock_verdict"] = brief;
  o.note(brief + "; written to results/deadlock-verdict.json");
  return o;
}

Check starvation() {
  Check o;
  const auto fx = load_fixtures(kFixtures);
  auto t0 = std::chrono::steady_clock::now();
  std::uint64_t worst = 0;
  int worst_seed = -1;
  int failures = 0;
  std::vector<int> all(13);
  std::iota(all.begin(), all.end(), 1);
  for (int seed = 0; seed < kStarvationRuns; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    Scenario sc;
    sc.cs_duration = 1 + rng() % 5;
    sc.delay = UniformRandomDelay{1, 1 + rng() % 6, static_cast<std::uint64_t>(seed)};
    auto pick = all;
    std::shuffle(pick.begin(), pick.end(), rng);
    for (int i = 0; i < 3; ++i) sc.events.push_back({rng() % 10, pid(pick[static_cast<std::size_t>(i)])});
    auto r = run(fx.s3_n13, sc);
    bool ok = r.outcome == ringmx::Outcome::Quiescent && r.stats.requests.size() == 3;
    for (const auto& q : r.stats.requests) ok = ok && q.cs_enter_tick.has_value();
    if (!ok && ++failures <= 3) o.require(false, "seed " + std::to_string(seed) + " " + std::string(to_string(r.outcome)));
    if (auto w = r.stats.max_wait(); w && *w > worst) {
      worst = *w;
      worst_seed = seed;
    }
  }
  double t = seconds_since(t0);
  o.require(failures == 0, std::to_string(failures) + " runs starved");
  o.require(t < kStarvationLimit, "took " + fmt(t));
  summary["starvation"] = {{"runs", kStarvationRuns}, {"failures", failures}, {"max_wait_ticks", worst},
                           {"max_wait_seed", worst_seed}};
  o.note(std::to_string(kStarvationRuns) + " runs, max wait " + std::to_string(worst) + " ticks (seed " +
         std::to_string(worst_seed) + "), " + fmt(t));
  return o;
}

Check determinism() {
  Check o;
  auto dir = fs::temp_directory_path() / "ringmx_acceptance";
  fs::create_directories(dir);
  for (const auto& name : replay_names()) {
    auto file = kFixtures / scenario_file_for(name);
    std::string bytes[2];
    for (int i = 0; i < 2; ++i) {
      auto r = run(load_scenario_file(file));
      auto out = dir / ("trace" + std::to_string(i) + ".jsonl");
      std::ofstream(out, std::ios::binary) << trace_text(r.trace);
      std::ifstream in(out, std::ios::binary);
      bytes[i].assign(std::istreambuf_iterator<char>(in), {});
    }
    o.require(!bytes[0].empty() && bytes[0] == bytes[1], name + " traces differ");
  }
  fs::remove_all(dir);
  o.note(std::to_string(replay_names().size()) + " bundled scenarios");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    std::function<Check()> check;
  };
  const std::vector<Criterion> criteria{
      {"AC1", "quorum fixtures validate", quorum_fixtures},
      {"AC2", "build_quorums orders and NoValidK", build_quorum_orders},
      {"AC3", "ring contention state tables reproduced", state_tables},
      {"AC4", "message complexity", message_complexity},
      {"AC5", "Maekawa deadlock and its resolution", maekawa_deadlock},
      {"AC6", "safety by exhaustive exploration", safety},
      {"AC7", "deadlock verdict persisted and replayable", deadlock_verdict},
      {"AC8", "no starvation under random delays", starvation},
      {"AC9", "byte-identical traces", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Check o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    summary["criteria"][c.id] = {{"pass", o.pass}, {"detail", o.detail}};
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << "  " << c.title << "  [" << o.detail << "]" << std::endl;
  }
  fs::create_directories(kResults);
  std::ofstream(kResults / "acceptance-summary.json") << summary.dump(2) << '\n';
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
