#include <algorithm>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "ringmx/explorer.hpp"

using namespace ringmx;

namespace {

const std::filesystem::path kFixtures = RINGMX_FIXTURE_DIR;

QuorumSystem fixture(const char* name) { return load_quorum_file(kFixtures / name); }

std::vector<ProcessId> ids(std::initializer_list<int> xs) {
  std::vector<ProcessId> out;
  for (int x : xs) out.push_back(pid(x));
  return out;
}

// Mutant: members pass every foreign Req on at once instead of parking it
// behind the current head of their queue.
struct EagerForwardRing : RingProtocol {
  RingStep receive(const QuorumSystem& qs, State s, ProcessId from, const Message& m) const {
    if (m.kind == RingKind::Req && m.origin != s.id) {
      const bool was_queued = std::find(s.queue.begin(), s.queue.end(), m.origin) != s.queue.end();
      auto step = on_receive_req(qs, std::move(s), m.origin);
      if (!was_queued && step.outbox.empty())
        step.outbox.push_back({forward_target(qs, m.origin, step.state.id), {RingKind::Req, m.origin}});
      return step;
    }
    return RingProtocol::receive(qs, std::move(s), from, m);
  }
};

}  // namespace

TEST(Explore, RingNThreeIsSafeAndExhaustive) {
  ExploreConfig cfg{fixture("quorums_s3_n3.json"), Algo::Ring, ids({1, 2, 3})};
  auto v = explore(cfg);
  EXPECT_TRUE(v.safe());
  EXPECT_FALSE(v.frontier_truncated);
  EXPECT_FALSE(v.deadlock_found());
  EXPECT_GT(v.states_visited, 1u);
}

TEST(Explore, RingNSevenAllRequestersSafe) {
  ExploreConfig cfg{fixture("quorums_s3_n7.json"), Algo::Ring, ids({1, 2, 3, 4, 5, 6, 7})};
  cfg.state_bound = 2'000'000;
  auto v = explore(cfg);
  EXPECT_TRUE(v.safe()) << v.safety->description;
  EXPECT_FALSE(v.deadlock_found());
}

TEST(Explore, MaekawaNSevenSafeInBothModes) {
  for (auto algo : {Algo::MaekawaBasic, Algo::MaekawaFull}) {
    ExploreConfig cfg{fixture("quorums_s3_n7.json"), algo, ids({1, 2, 4})};
    auto v = explore(cfg);
    EXPECT_TRUE(v.safe()) << to_string(algo) << ": " << v.safety->description;
    EXPECT_FALSE(v.frontier_truncated);
  }
}

TEST(Explore, MaekawaBasicDeadlocksOnContendedTriple) {
  ExploreConfig cfg{fixture("quorums_s2.json"), Algo::MaekawaBasic, ids({2, 9, 13})};
  auto v = explore(cfg);
  EXPECT_TRUE(v.safe());
  ASSERT_TRUE(v.deadlock_found());
  bool expected = false;
  for (const auto& d : v.deadlocks) {
    ASSERT_FALSE(d.cycle.empty());
    auto r = replay(cfg, d.counterexample);
    EXPECT_TRUE(r.quiescent_with_waiters);
    EXPECT_EQ(r.cycle, d.cycle);
    expected = expected || describe_cycle(d.cycle) == "2->8, 13->4, 9->11";
  }
  EXPECT_TRUE(expected);
}

TEST(Explore, MaekawaFullResolvesContendedTriple) {
  ExploreConfig cfg{fixture("quorums_s2.json"), Algo::MaekawaFull, ids({2, 9, 13})};
  auto v = explore(cfg);
  EXPECT_TRUE(v.safe());
  EXPECT_FALSE(v.deadlock_found());
  EXPECT_FALSE(v.frontier_truncated);
}

TEST(Explore, CatchesUnsafeVariant) {
  ExploreConfig cfg{fixture("quorums_s3_n3.json"), Algo::Ring, ids({1, 2, 3})};
  Verdict v;
  explore_detail::Search<EagerForwardRing> search(cfg, v);
  search.run(explore_detail::initial_world(cfg, EagerForwardRing{}, false));
  ASSERT_FALSE(v.safe());
  EXPECT_NE(v.safety->description.find("more than one"), std::string::npos);
  EXPECT_FALSE(v.safety->counterexample.empty());
}

TEST(Explore, SingleRequesterIsLinear) {
  auto qs = fixture("quorums_s3.json");
  for (int p : {1, 2, 9, 13}) {
    auto v = explore({qs, Algo::Ring, ids({p})});
    EXPECT_TRUE(v.safe());
    EXPECT_FALSE(v.deadlock_found());
    EXPECT_GE(v.states_visited, static_cast<std::uint64_t>(qs.k() + 1));
  }
}

TEST(Explore, DepthBoundTruncates) {
  ExploreConfig cfg{fixture("quorums_s3_n7.json"), Algo::Ring, ids({1, 2, 4}), 3};
  auto v = explore(cfg);
  EXPECT_TRUE(v.frontier_truncated);
  EXPECT_LE(v.max_depth, 3u);
  cfg.depth_bound = std::numeric_limits<std::uint64_t>::max();
  cfg.state_bound = 10;
  EXPECT_TRUE(explore(cfg).frontier_truncated);
}

TEST(Explore, ConfigErrors) {
  auto qs = fixture("quorums_s3_n3.json");
  EXPECT_THROW(explore({qs, Algo::Ring, ids({4})}), InvalidScenario);
  EXPECT_THROW(explore({qs, Algo::Ring, ids({1, 1})}), InvalidScenario);
  EXPECT_THROW(explore({qs, Algo::Ring, ids({1}), 0}), InvalidScenario);
  EXPECT_THROW(explore({fixture("broken/disjoint_singletons.json"), Algo::Ring, ids({1})}), InvalidScenario);
}

TEST(Explore, NoRequestersIsTrivial) {
  auto v = explore({fixture("quorums_s3_n3.json"), Algo::Ring, {}});
  EXPECT_TRUE(v.safe());
  EXPECT_EQ(v.states_visited, 1u);
}

TEST(Explore, VerdictIsStable) {
  ExploreConfig cfg{fixture("quorums_s2.json"), Algo::MaekawaBasic, ids({2, 9, 13})};
  EXPECT_EQ(verdict_json(cfg, explore(cfg)).dump(), verdict_json(cfg, explore(cfg)).dump());
}

TEST(Explore, VerdictJsonRoundTrip) {
  ExploreConfig cfg{fixture("quorums_s2.json"), Algo::MaekawaBasic, ids({2, 9, 13}), 400, 1'000'000};
  auto v = explore(cfg);
  auto j = nlohmann::json::parse(verdict_json(cfg, v).dump());
  auto back = config_from_verdict_json(j);
  EXPECT_EQ(back.quorums, cfg.quorums);
  EXPECT_EQ(back.algo, cfg.algo);
  EXPECT_EQ(back.requesters, cfg.requesters);
  EXPECT_EQ(back.depth_bound, 400u);
  const auto& first = j.at("deadlock").at("findings").at(0);
  auto steps = steps_from_json(first.at("counterexample"));
  EXPECT_EQ(steps, v.deadlocks[0].counterexample);
  EXPECT_EQ(describe_cycle(replay(back, steps).cycle), first.at("cycle").get<std::string>());
}

TEST(Replay, ReleaseStepsSerialize) {
  Counterexample c{{ExploreStep::Kind::Deliver, pid(1), pid(2)}, {ExploreStep::Kind::Release, pid(3), pid(3)}};
  auto j = steps_json(c);
  EXPECT_FALSE(j[0].contains("release"));
  EXPECT_TRUE(j[1].at("release").get<bool>());
  EXPECT_EQ(steps_from_json(nlohmann::json::parse(j.dump())), c);
}

TEST(Replay, Divergence) {
  ExploreConfig cfg{fixture("quorums_s3_n3.json"), Algo::Ring, ids({1})};
  EXPECT_THROW(replay(cfg, {{ExploreStep::Kind::Deliver, pid(3), pid(2)}}), ReplayDivergence);
  EXPECT_THROW(replay(cfg, {{ExploreStep::Kind::Release, pid(1), pid(1)}}), ReplayDivergence);
}

// Every state a simulator run passes through after its requests are in is
// one the explorer reached.
TEST(Agreement, SimulatorStatesAreExplored) {
  ExploreConfig cfg{fixture("quorums_s3_n3.json"), Algo::Ring, ids({1, 2, 3})};
  auto [verdict, states] = explore_with_states(cfg);
  ASSERT_FALSE(verdict.frontier_truncated);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    WorldOptions opts;
    opts.record_trace = false;
    opts.cs_duration = 1 + seed % 3;
    opts.delay = UniformRandomDelay{1, 1 + seed % 5, seed};
    SimWorld<RingProtocol> w(cfg.quorums, RingProtocol{}, opts);
    for (ProcessId p : cfg.requesters) w.inject_request(p);
    ASSERT_TRUE(states.contains(w.canonical_key()));
    while (w.step()) ASSERT_TRUE(states.contains(w.canonical_key())) << "seed " << seed << " t=" << w.time();
    EXPECT_FALSE(w.violation());
  }
}

TEST(WaitCycle, FindsAndNormalizes) {
  std::vector<WaitEdge> edges{{pid(13), pid(4), pid(9)}, {pid(2), pid(8), pid(13)}, {pid(9), pid(11), pid(2)},
                              {pid(5), pid(8), pid(13)}};
  auto c = find_wait_cycle(edges);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.front().waiter, pid(2));
  EXPECT_EQ(describe_cycle(c), "2->8, 13->4, 9->11");
  EXPECT_TRUE(find_wait_cycle({{pid(2), pid(8), pid(13)}}).empty());
  EXPECT_TRUE(find_wait_cycle({{pid(2), pid(2), pid(2)}}).empty());
}
