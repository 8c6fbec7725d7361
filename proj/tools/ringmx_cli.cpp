// ringmx: quorum tools, simulator runs, state-space exploration and the
// bundled reproductions.
//
// Exit codes: 0 ok, 1 validation or verdict failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ringmx/ringmx.hpp"

#ifndef RINGMX_FIXTURE_DIR
#define RINGMX_FIXTURE_DIR "fixtures"
#endif

namespace fs = std::filesystem;
using namespace ringmx;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string trace_text(const Trace& t) {
  std::ostringstream os;
  write_trace_jsonl(os, t);
  return os.str();
}

std::string stats_text(const RunStats& s) {
  std::ostringstream os;
  write_stats_csv(os, s);
  return os.str();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(p.string() + ": " + e.what());
  }
}

// ---- quorum-gen

struct GenOpts {
  long n = 0;
  std::string out;
};

int quorum_gen(const GenOpts& o) {
  QuorumSystem qs;
  try {
    qs = build_quorums(o.n);
  } catch (const NoValidK& e) {
    std::cerr << e.what() << '\n';
    return kFail;
  } catch (const ConstructionFailed& e) {
    std::cerr << e.what() << '\n';
    return kFail;
  }
  auto text = quorum_to_json(qs).dump(2) + "\n";
  if (o.out.empty())
    std::cout << text;
  else
    write_file(o.out, text);
  return kOk;
}

// ---- quorum-check

int quorum_check(const std::string& file) {
  QuorumSystem qs;
  try {
    qs = load_quorum_file(file);
  } catch (const MalformedQuorum& e) {
    std::cerr << e.what() << '\n';
    return kFail;
  }
  auto r = validate(qs);
  auto j = report_to_json(r);
  j["n"] = qs.n();
  j["k"] = qs.k();
  std::cout << j.dump(2) << '\n';
  return r.all_pass() ? kOk : kFail;
}

// ---- run

struct RunOpts {
  std::string scenario;
  std::string trace_out;
  std::string stats_out;
  std::optional<std::uint64_t> seed;
  bool count_self = false;
};

int run_cmd(const RunOpts& o) {
  Scenario sc = load_scenario_file(o.scenario);
  if (o.seed) {
    auto* u = std::get_if<UniformRandomDelay>(&sc.delay);
    if (!u) throw UsageError("--seed only applies to uniform_random delay models");
    u->seed = *o.seed;
  }
  if (o.count_self) sc.count_self_messages = true;
  auto r = run(sc);
  if (!o.trace_out.empty()) write_file(o.trace_out, trace_text(r.trace));
  if (!o.stats_out.empty()) write_file(o.stats_out, stats_text(r.stats));

  nlohmann::ordered_json summary;
  summary["outcome"] = std::string(to_string(r.outcome));
  summary["steps"] = r.steps;
  summary["total_messages"] = r.stats.total_messages;
  if (!r.diagnostic.empty()) summary["diagnostic"] = r.diagnostic;
  if (!r.cycle.empty()) summary["wait_for_cycle"] = describe_cycle(r.cycle);
  std::cout << summary.dump(2) << '\n';
  return r.outcome == Outcome::SafetyViolation ? kFail : kOk;
}

// ---- explore

struct ExploreOpts {
  std::string quorums;
  std::string algo = "ring";
  std::vector<int> requesters;
  std::uint64_t depth = 0;
  std::uint64_t states = 5'000'000;
  std::string out;
};

int explore_cmd(const ExploreOpts& o) {
  ExploreConfig cfg;
  cfg.quorums = load_quorum_file(o.quorums);
  cfg.algo = parse_algo(o.algo);
  for (int r : o.requesters) cfg.requesters.push_back(pid(r));
  if (o.depth) cfg.depth_bound = o.depth;
  cfg.state_bound = o.states;
  auto v = explore(cfg);
  auto j = verdict_json(cfg, v);
  if (!o.out.empty()) write_file(o.out, j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  return v.safe() && !v.deadlock_found() ? kOk : kFail;
}

// ---- replay

int replay_cmd(const std::string& file, const std::string& trace_out) {
  auto j = read_json(file);
  auto cfg = config_from_verdict_json(j);
  bool ok = true;
  nlohmann::ordered_json report = nlohmann::ordered_json::array();
  Trace last;

  if (j.at("safety").at("status") == "violated") {
    auto steps = steps_from_json(j.at("safety").at("counterexample"));
    auto r = replay(cfg, steps);
    const bool reproduced = r.violation.has_value();
    ok = ok && reproduced;
    report.push_back({{"finding", "safety"}, {"reproduced", reproduced}, {"violation", r.violation.value_or("")}});
    last = std::move(r.trace);
  }
  for (const auto& f : j.at("deadlock").at("findings")) {
    auto r = replay(cfg, steps_from_json(f.at("counterexample")));
    const bool reproduced = r.quiescent_with_waiters && describe_cycle(r.cycle) == f.at("cycle").get<std::string>();
    ok = ok && reproduced;
    report.push_back({{"finding", "deadlock"}, {"cycle", describe_cycle(r.cycle)}, {"reproduced", reproduced}});
    last = std::move(r.trace);
  }
  if (!trace_out.empty()) write_file(trace_out, trace_text(last));
  std::cout << report.dump(2) << '\n';
  return ok ? kOk : kFail;
}

// ---- replay-paper

int reproduce_cmd(const std::string& name, const std::string& fixtures, const std::string& out_dir) {
  auto fx = load_fixtures(fixtures);
  auto r = reproduce(fx, name);
  if (!out_dir.empty()) {
    fs::path dir = out_dir;
    write_file(dir / (name + ".trace.jsonl"), trace_text(r.run.trace));
    write_file(dir / (name + ".stats.csv"), stats_text(r.run.stats));
    write_file(dir / (name + ".report.json"), r.report.dump(2) + "\n");
  }
  std::cout << r.report.dump(2) << '\n';
  return r.pass ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ringmx: ring-ordered quorum mutual exclusion toolkit"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("quorum-gen", "build a quorum system for n = k(k-1)+1");
  gen_cmd->add_option("n,--n", gen.n, "number of processes")->required();
  gen_cmd->add_option("-o,--out", gen.out, "output file (default: stdout)");

  std::string check_file;
  auto* check_cmd = app.add_subcommand("quorum-check", "validate a quorum file");
  check_cmd->add_option("file", check_file, "quorum JSON file")->required();

  RunOpts run;
  auto* run_sub = app.add_subcommand("run", "simulate a scenario");
  run_sub->add_option("scenario,--scenario", run.scenario, "scenario JSON file")->required();
  run_sub->add_option("--trace-out", run.trace_out, "write the trace as JSON lines");
  run_sub->add_option("--stats-out", run.stats_out, "write per-request stats as CSV");
  run_sub->add_option("--seed", run.seed, "override the random delay seed");
  run_sub->add_flag("--count-self-messages", run.count_self, "send self-addressed messages over the network");

  ExploreOpts ex;
  auto* ex_cmd = app.add_subcommand("explore", "exhaustively explore delivery interleavings");
  ex_cmd->add_option("--quorums", ex.quorums, "quorum JSON file")->required();
  ex_cmd->add_option("--algo", ex.algo, "ring | maekawa-basic | maekawa-full")
      ->check(CLI::IsMember({"ring", "maekawa-basic", "maekawa-full"}));
  ex_cmd->add_option("--requesters", ex.requesters, "requesting processes, e.g. 1,2,4")->delimiter(',')->required();
  ex_cmd->add_option("--depth", ex.depth, "depth bound (default: none)");
  ex_cmd->add_option("--states", ex.states, "state bound")->check(CLI::PositiveNumber);
  ex_cmd->add_option("-o,--out", ex.out, "write the verdict JSON here");

  std::string replay_file, replay_trace;
  auto* replay_sub = app.add_subcommand("replay", "re-execute the counterexamples of a verdict file");
  replay_sub->add_option("verdict", replay_file, "verdict JSON written by explore")->required();
  replay_sub->add_option("--trace-out", replay_trace, "write the trace of the last replayed finding");

  std::string repro_name, fixtures = RINGMX_FIXTURE_DIR, out_dir;
  auto* repro_cmd = app.add_subcommand("replay-paper", "run a bundled reproduction against its golden file");
  repro_cmd->add_option("name", repro_name, "section3b | fig4-basic | fig4-full | single-request")
      ->required()
      ->check(CLI::IsMember(replay_names()));
  repro_cmd->add_option("--fixtures", fixtures, "fixture directory");
  repro_cmd->add_option("--out-dir", out_dir, "write <name>.trace.jsonl, .stats.csv and .report.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen_cmd) return quorum_gen(gen);
    if (*check_cmd) return quorum_check(check_file);
    if (*run_sub) return run_cmd(run);
    if (*ex_cmd) return explore_cmd(ex);
    if (*replay_sub) return replay_cmd(replay_file, replay_trace);
    if (*repro_cmd) return reproduce_cmd(repro_name, fixtures, out_dir);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const InvalidScenario& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFail;
  }
  return kUsage;
}
