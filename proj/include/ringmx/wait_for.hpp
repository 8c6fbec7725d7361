#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "ringmx/core.hpp"

namespace ringmx {

// Finds a cycle in the waiter -> holder graph. Returns one edge per waiter on
// the cycle, rotated so the smallest waiter comes first; empty if acyclic.
inline std::vector<WaitEdge> find_wait_cycle(std::vector<WaitEdge> edges) {
  std::sort(edges.begin(), edges.end());
  std::map<ProcessId, std::vector<const WaitEdge*>> out;
  for (const auto& e : edges) out[e.waiter].push_back(&e);

  enum class Mark { White, Grey, Black };
  std::map<ProcessId, Mark> mark;
  std::vector<const WaitEdge*> path;
  std::vector<WaitEdge> cycle;

  auto dfs = [&](auto&& self, ProcessId v) -> bool {
    mark[v] = Mark::Grey;
    for (const WaitEdge* e : out[v]) {
      ProcessId w = e->holder;
      if (w == v) continue;  // a node queued behind itself is not a wait
      path.push_back(e);
      if (mark[w] == Mark::Grey) {
        auto start = std::find_if(path.begin(), path.end(), [&](const WaitEdge* x) { return x->waiter == w; });
        for (auto it = start; it != path.end(); ++it) cycle.push_back(**it);
        return true;
      }
      if (mark[w] == Mark::White && self(self, w)) return true;
      path.pop_back();
    }
    mark[v] = Mark::Black;
    return false;
  };

  for (const auto& [v, _] : out) {
    if (mark[v] == Mark::White && dfs(dfs, v)) break;
  }
  if (cycle.empty()) return cycle;
  auto first = std::min_element(cycle.begin(), cycle.end(),
                                [](const WaitEdge& a, const WaitEdge& b) { return a.waiter < b.waiter; });
  std::rotate(cycle.begin(), first, cycle.end());
  return cycle;
}

}  // namespace ringmx
