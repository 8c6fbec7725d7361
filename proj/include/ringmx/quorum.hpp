#pragma once

// Quorum systems in Maekawa's sense: n processes, one group S_i per process,
// checked against the four classic conditions (pairwise intersection,
// self-membership, equal size k, equal responsibility) and viewed as
// ascending circular rings.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ringmx/core.hpp"
#include "ringmx/errors.hpp"

namespace ringmx {

using Group = std::vector<ProcessId>;

class QuorumSystem {
 public:
  QuorumSystem() = default;

  // sets[i - 1] is S_i. Members are sorted and deduplicated. Throws
  // MalformedQuorum unless n >= 1, there are exactly n nonempty groups and
  // every member lies in 1..n. Self-membership is left to validate().
  QuorumSystem(int n, int k, std::vector<Group> sets) : n_(n), k_(k), sets_(std::move(sets)) {
    if (n_ < 1) throw MalformedQuorum("n must be positive");
    if (static_cast<int>(sets_.size()) != n_)
      throw MalformedQuorum("expected " + std::to_string(n_) + " groups, got " +
                            std::to_string(sets_.size()));
    for (std::size_t i = 0; i < sets_.size(); ++i) {
      auto& g = sets_[i];
      if (g.empty()) throw MalformedQuorum("group S_" + std::to_string(i + 1) + " is empty");
      std::sort(g.begin(), g.end());
      g.erase(std::unique(g.begin(), g.end()), g.end());
      for (ProcessId m : g) {
        if (to_int(m) < 1 || to_int(m) > n_)
          throw MalformedQuorum("member " + std::to_string(to_int(m)) + " of S_" +
                                std::to_string(i + 1) + " outside 1.." + std::to_string(n_));
      }
    }
  }

  int n() const noexcept { return n_; }
  int k() const noexcept { return k_; }

  bool contains(ProcessId p) const noexcept { return to_int(p) >= 1 && to_int(p) <= n_; }

  // S_origin, ascending.
  std::span<const ProcessId> group(ProcessId origin) const {
    if (!contains(origin)) throw UnknownProcess(to_int(origin));
    return sets_[static_cast<std::size_t>(to_int(origin) - 1)];
  }

  bool in_group(ProcessId origin, ProcessId member) const {
    auto g = group(origin);
    return std::binary_search(g.begin(), g.end(), member);
  }

  std::vector<ProcessId> processes() const {
    std::vector<ProcessId> out;
    out.reserve(static_cast<std::size_t>(n_));
    for (int i = 1; i <= n_; ++i) out.push_back(pid(i));
    return out;
  }

  friend bool operator==(const QuorumSystem&, const QuorumSystem&) = default;

 private:
  int n_ = 0;
  int k_ = 0;
  std::vector<Group> sets_;
};

struct RingView {
  ProcessId origin{};
  Group members;  // strictly ascending; circular

  friend bool operator==(const RingView&, const RingView&) = default;
};

inline RingView ring_of(const QuorumSystem& qs, ProcessId origin) {
  auto g = qs.group(origin);
  return RingView{origin, Group(g.begin(), g.end())};
}

// Next member in ascending circular order.
inline ProcessId successor(std::span<const ProcessId> ring, ProcessId member, ProcessId origin) {
  auto it = std::lower_bound(ring.begin(), ring.end(), member);
  if (it == ring.end() || *it != member) throw NotAMember(to_int(member), to_int(origin));
  ++it;
  return it == ring.end() ? ring.front() : *it;
}

inline ProcessId successor(const RingView& ring, ProcessId member) {
  return successor(ring.members, member, ring.origin);
}

inline ProcessId min_of(const RingView& ring) { return ring.members.front(); }
inline ProcessId max_of(const RingView& ring) { return ring.members.back(); }

struct ValidationReport {
  struct Intersection {
    bool pass = true;
    std::vector<std::pair<ProcessId, ProcessId>> offending;  // (i, j), i < j
  };
  struct SelfMembership {
    bool pass = true;
    std::vector<ProcessId> offending;
  };
  struct EqualSize {
    bool pass = true;
    std::vector<std::size_t> sizes;  // sizes[i - 1] = |S_i|
  };
  struct EqualResponsibility {
    bool pass = true;
    std::vector<std::size_t> counts;  // counts[j - 1] = #groups containing j
  };

  Intersection cond1_pairwise_intersection;
  SelfMembership cond2_self_membership;
  EqualSize cond3_equal_size;
  EqualResponsibility cond4_equal_responsibility;

  bool all_pass() const noexcept {
    return cond1_pairwise_intersection.pass && cond2_self_membership.pass &&
           cond3_equal_size.pass && cond4_equal_responsibility.pass;
  }
};

// Checks every condition exhaustively and collects every offender.
inline ValidationReport validate(const QuorumSystem& qs) {
  ValidationReport r;
  const int n = qs.n();
  const auto k = static_cast<std::size_t>(qs.k());

  for (int i = 1; i <= n; ++i) {
    auto a = qs.group(pid(i));
    for (int j = i + 1; j <= n; ++j) {
      auto b = qs.group(pid(j));
      bool meet = false;
      for (auto x = a.begin(), y = b.begin(); x != a.end() && y != b.end();) {
        if (*x == *y) {
          meet = true;
          break;
        }
        if (*x < *y) ++x; else ++y;
      }
      if (!meet) {
        r.cond1_pairwise_intersection.pass = false;
        r.cond1_pairwise_intersection.offending.emplace_back(pid(i), pid(j));
      }
    }
  }

  r.cond4_equal_responsibility.counts.assign(static_cast<std::size_t>(n), 0);
  for (int i = 1; i <= n; ++i) {
    auto g = qs.group(pid(i));
    if (!std::binary_search(g.begin(), g.end(), pid(i))) {
      r.cond2_self_membership.pass = false;
      r.cond2_self_membership.offending.push_back(pid(i));
    }
    r.cond3_equal_size.sizes.push_back(g.size());
    if (g.size() != k) r.cond3_equal_size.pass = false;
    for (ProcessId m : g) ++r.cond4_equal_responsibility.counts[static_cast<std::size_t>(to_int(m) - 1)];
  }
  for (auto c : r.cond4_equal_responsibility.counts)
    if (c != k) r.cond4_equal_responsibility.pass = false;
  return r;
}

// Unique positive k with k(k-1)+1 = n, if any.
inline std::optional<int> group_size_for(long n) {
  if (n < 1) return std::nullopt;
  for (long k = 1; k * (k - 1) + 1 <= n; ++k)
    if (k * (k - 1) + 1 == n) return static_cast<int>(k);
  return std::nullopt;
}

namespace detail {

// Depth-first search for a planar difference set of size k modulo n,
// normalized to contain 0 and 1. Returns the lexicographically first one.
class DifferenceSetSearch {
 public:
  DifferenceSetSearch(int n, int k, std::uint64_t budget)
      : n_(n), k_(k), budget_(budget), used_(static_cast<std::size_t>(n), false) {}

  std::optional<std::vector<int>> run() {
    block_ = {0};
    if (k_ == 1) return block_;
    if (!try_add(1)) return std::nullopt;
    if (extend(2)) return block_;
    return std::nullopt;
  }

  bool exhausted_budget() const noexcept { return steps_ > budget_; }

 private:
  bool try_add(int b) {
    std::vector<int> diffs;
    for (int x : block_) {
      int d1 = ((b - x) % n_ + n_) % n_;
      int d2 = n_ - d1;
      for (int d : {d1, d2}) {
        if (used_[static_cast<std::size_t>(d)] ||
            std::find(diffs.begin(), diffs.end(), d) != diffs.end())
          return false;
        diffs.push_back(d);
      }
    }
    for (int d : diffs) used_[static_cast<std::size_t>(d)] = true;
    block_.push_back(b);
    undo_.push_back(std::move(diffs));
    return true;
  }

  void remove_last() {
    for (int d : undo_.back()) used_[static_cast<std::size_t>(d)] = false;
    undo_.pop_back();
    block_.pop_back();
  }

  bool extend(int size) {
    if (size == k_) return true;
    if (++steps_ > budget_) return false;
    // leave room for the remaining k - size - 1 larger elements
    for (int b = block_.back() + 1; b <= n_ - (k_ - size); ++b) {
      if (!try_add(b)) continue;
      if (extend(size + 1)) return true;
      remove_last();
      if (steps_ > budget_) return false;
    }
    return false;
  }

  int n_;
  int k_;
  std::uint64_t budget_;
  std::uint64_t steps_ = 0;
  std::vector<bool> used_;
  std::vector<int> block_;
  std::vector<std::vector<int>> undo_;
};

}  // namespace detail

// Deterministic Maekawa-style system for n = k(k-1)+1: S_i is the base
// difference set shifted by i - 1 and mapped onto 1..n.
inline QuorumSystem build_quorums(long n) {
  auto k = group_size_for(n);
  if (!k) throw NoValidK(n);
  detail::DifferenceSetSearch search(static_cast<int>(n), *k, 50'000'000);
  auto block = search.run();
  if (!block) throw ConstructionFailed(n);

  const int size = static_cast<int>(n);
  std::vector<Group> sets;
  sets.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    Group g;
    for (int b : *block) g.push_back(pid((i + b) % size + 1));
    sets.push_back(std::move(g));
  }
  return QuorumSystem(size, *k, std::move(sets));
}

// ---- JSON file format: {"n": int, "k": int, "sets": {"<id>": [ints]}} ----

inline nlohmann::ordered_json quorum_to_json(const QuorumSystem& qs) {
  nlohmann::ordered_json j;
  j["n"] = qs.n();
  j["k"] = qs.k();
  nlohmann::ordered_json sets = nlohmann::ordered_json::object();
  for (int i = 1; i <= qs.n(); ++i) {
    auto arr = nlohmann::ordered_json::array();
    for (ProcessId m : qs.group(pid(i))) arr.push_back(to_int(m));
    sets[std::to_string(i)] = std::move(arr);
  }
  j["sets"] = std::move(sets);
  return j;
}

inline QuorumSystem quorum_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("n").get<int>();
    const int k = j.at("k").get<int>();
    const auto& sets = j.at("sets");
    if (!sets.is_object()) throw MalformedQuorum("\"sets\" must be an object");
    if (n < 1) throw MalformedQuorum("n must be positive");
    std::vector<Group> groups(static_cast<std::size_t>(n));
    for (const auto& [key, members] : sets.items()) {
      std::size_t used = 0;
      int id = 0;
      try {
        id = std::stoi(key, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != key.size() || id < 1 || id > n)
        throw MalformedQuorum("bad group id \"" + key + "\"");
      for (const auto& m : members) groups[static_cast<std::size_t>(id - 1)].push_back(pid(m.get<int>()));
    }
    return QuorumSystem(n, k, std::move(groups));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedQuorum(std::string("quorum json: ") + e.what());
  }
}

inline QuorumSystem load_quorum_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedQuorum("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedQuorum(path.string() + ": " + e.what());
  }
  return quorum_from_json(j);
}

inline void save_quorum_file(const std::filesystem::path& path, const QuorumSystem& qs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << quorum_to_json(qs).dump(2) << '\n';
}

inline nlohmann::ordered_json report_to_json(const ValidationReport& r) {
  nlohmann::ordered_json j;
  auto pairs = nlohmann::ordered_json::array();
  for (auto [a, b] : r.cond1_pairwise_intersection.offending) pairs.push_back({to_int(a), to_int(b)});
  j["cond1_pairwise_intersection"] = {{"pass", r.cond1_pairwise_intersection.pass}, {"offending", pairs}};
  auto ids = nlohmann::ordered_json::array();
  for (auto p : r.cond2_self_membership.offending) ids.push_back(to_int(p));
  j["cond2_self_membership"] = {{"pass", r.cond2_self_membership.pass}, {"offending", ids}};
  j["cond3_equal_size"] = {{"pass", r.cond3_equal_size.pass}, {"sizes", r.cond3_equal_size.sizes}};
  j["cond4_equal_responsibility"] = {{"pass", r.cond4_equal_responsibility.pass},
                                     {"counts", r.cond4_equal_responsibility.counts}};
  j["all_pass"] = r.all_pass();
  return j;
}

}  // namespace ringmx
