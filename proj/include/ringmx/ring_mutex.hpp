#pragma once

// Ring-ordered quorum mutual exclusion as a pure per-node state machine.
//
// Every group is an ascending circular list. A request travels through the
// members of its origin's group in ascending order; each member queues it
// and passes it on only while it is the head of the local queue. The origin
// enters the critical section once its own request has come back to it and
// it heads its own queue. No timestamps are used.
//
// Forwarding always targets the successor of the *current* node inside the
// ring of the *request's origin*, so a message carries only the origin id.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ringmx/core.hpp"
#include "ringmx/errors.hpp"
#include "ringmx/quorum.hpp"

namespace ringmx {

enum class RingKind : std::uint8_t { Req, Rel };

constexpr std::string_view to_string(RingKind k) noexcept { return k == RingKind::Req ? "Req" : "Rel"; }

struct RingMessage {
  RingKind kind = RingKind::Req;
  ProcessId origin{};

  friend bool operator==(const RingMessage&, const RingMessage&) = default;
};

struct RingNodeState {
  ProcessId id{};
  Stat stat = Stat::Passive;
  RingView group;
  std::vector<ProcessId> queue;  // head = front
  bool blocked = false;
  // Own request has completed its traversal and come back.
  bool circulated = false;

  friend bool operator==(const RingNodeState&, const RingNodeState&) = default;
};

struct RingStep {
  RingNodeState state;
  std::vector<Outgoing<RingMessage>> outbox;
};

inline RingNodeState make_ring_node(const QuorumSystem& qs, ProcessId id) {
  return RingNodeState{id, Stat::Passive, ring_of(qs, id), {}, false, false};
}

namespace ring_detail {

inline bool queued(const RingNodeState& s, ProcessId p) {
  return std::find(s.queue.begin(), s.queue.end(), p) != s.queue.end();
}

inline void drop(RingNodeState& s, ProcessId p) {
  s.queue.erase(std::remove(s.queue.begin(), s.queue.end(), p), s.queue.end());
}

// Neither the smallest nor the largest of its own group: such an origin is
// visited in the middle of its own traversal.
inline bool is_middle(const RingNodeState& s) {
  return s.id != min_of(s.group) && s.id != max_of(s.group);
}

}  // namespace ring_detail

// Where `self` passes Req(origin) on: the next member of the origin's ring,
// except that the largest member hands it back to the origin (which is the
// wraparound successor anyway unless the origin sits mid-ring).
inline ProcessId forward_target(const QuorumSystem& qs, ProcessId origin, ProcessId self) {
  auto ring = qs.group(origin);
  if (self != origin && self == ring.back()) {
    if (!std::binary_search(ring.begin(), ring.end(), self)) throw NotAMember(to_int(self), to_int(origin));
    return origin;
  }
  return successor(ring, self, origin);
}

inline RingStep on_request_cs(const QuorumSystem& /*qs*/, RingNodeState s) {
  if (s.stat != Stat::Passive) throw NotPassive(to_int(s.id));
  RingStep out;
  s.stat = Stat::Wait;
  if (s.id == min_of(s.group)) {
    s.queue.push_back(s.id);
    if (s.queue.front() == s.id) {
      out.outbox.push_back({successor(s.group, s.id), {RingKind::Req, s.id}});
      s.blocked = true;
    }
  } else {
    out.outbox.push_back({min_of(s.group), {RingKind::Req, s.id}});
  }
  out.state = std::move(s);
  return out;
}

inline RingStep on_receive_req(const QuorumSystem& qs, RingNodeState s, ProcessId origin) {
  if (!qs.in_group(origin, s.id)) throw NotAMember(to_int(s.id), to_int(origin));
  RingStep out;
  if (origin != s.id) {
    if (ring_detail::queued(s, origin)) {
      out.state = std::move(s);
      return out;
    }
    s.queue.push_back(origin);
    if (s.queue.front() == origin) {
      out.outbox.push_back({forward_target(qs, origin, s.id), {RingKind::Req, origin}});
      s.blocked = true;
    }
    out.state = std::move(s);
    return out;
  }

  if (s.stat != Stat::Wait)
    throw UnexpectedMessage("Req(" + std::to_string(to_int(origin)) + ") returned to a node that is not waiting");
  if (ring_detail::is_middle(s) && !ring_detail::queued(s, s.id)) {
    // first pass through a mid-ring origin
    s.queue.push_back(s.id);
    if (s.queue.front() == s.id) {
      out.outbox.push_back({successor(s.group, s.id), {RingKind::Req, s.id}});
      s.blocked = true;
    }
    out.state = std::move(s);
    return out;
  }
  if (!ring_detail::queued(s, s.id)) s.queue.push_back(s.id);
  s.circulated = true;
  if (s.queue.front() == s.id) {
    s.stat = Stat::Ready;
    s.blocked = true;
  }
  out.state = std::move(s);
  return out;
}

inline RingStep on_release_cs(const QuorumSystem& qs, RingNodeState s) {
  if (s.stat != Stat::Ready) throw NotInCriticalSection(to_int(s.id));
  RingStep out;
  for (ProcessId m : s.group.members)
    if (m != s.id) out.outbox.push_back({m, {RingKind::Rel, s.id}});
  s.queue.erase(s.queue.begin());
  s.stat = Stat::Passive;
  s.circulated = false;
  if (!s.queue.empty()) {
    ProcessId h = s.queue.front();
    out.outbox.push_back({forward_target(qs, h, s.id), {RingKind::Req, h}});
    s.blocked = true;
  } else {
    s.blocked = false;
  }
  out.state = std::move(s);
  return out;
}

inline RingStep on_receive_rel(const QuorumSystem& qs, RingNodeState s, ProcessId releaser) {
  RingStep out;
  if (!ring_detail::queued(s, releaser)) {
    out.state = std::move(s);
    return out;
  }
  ring_detail::drop(s, releaser);
  s.blocked = false;
  if (!s.queue.empty()) {
    s.blocked = true;
    ProcessId h = s.queue.front();
    if (h == s.id && s.circulated) {
      s.stat = Stat::Ready;
    } else if (h == s.id) {
      out.outbox.push_back({successor(s.group, s.id), {RingKind::Req, s.id}});
    } else {
      out.outbox.push_back({forward_target(qs, h, s.id), {RingKind::Req, h}});
    }
  }
  out.state = std::move(s);
  return out;
}

inline std::vector<WaitEdge> wait_for_edges(const RingNodeState& s) {
  std::vector<WaitEdge> edges;
  for (std::size_t i = 1; i < s.queue.size(); ++i) edges.push_back({s.queue[i], s.id, s.queue.front()});
  return edges;
}

// First violated local invariant, if any.
inline std::optional<std::string> check_invariants(const QuorumSystem& qs, const RingNodeState& s) {
  if (s.stat == Stat::Ready && (s.queue.empty() || s.queue.front() != s.id))
    return "node " + std::to_string(to_int(s.id)) + " is Ready without heading its queue";
  auto sorted = s.queue;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    return "node " + std::to_string(to_int(s.id)) + " has a duplicate queue entry";
  for (ProcessId p : s.queue)
    if (!qs.in_group(p, s.id))
      return "node " + std::to_string(to_int(s.id)) + " queued " + std::to_string(to_int(p)) +
             " from outside its groups";
  if (s.circulated && s.stat == Stat::Passive)
    return "node " + std::to_string(to_int(s.id)) + " is circulated while passive";
  return std::nullopt;
}

}  // namespace ringmx
