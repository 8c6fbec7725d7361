#pragma once

// Maekawa's quorum mutual exclusion, used as the baseline.
//
// Every node plays two roles: requester (collects LOCKED from each member
// of its own group) and arbiter (grants its single lock to one requester at
// a time). `basic` mode uses only REQUEST/LOCKED/RELEASE with FIFO arbiter
// queues and can deadlock; `full` mode adds Lamport-timestamp priorities and
// the FAILED/INQUIRE/RELINQUISH exchange.
//
// Handlers return every message they produce, including ones addressed to
// the node itself; callers decide whether self-messages travel the network
// (see settle_local in protocol.hpp).

#include <algorithm>
#include <compare>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ringmx/core.hpp"
#include "ringmx/errors.hpp"
#include "ringmx/quorum.hpp"

namespace ringmx {

struct Timestamp {
  std::uint64_t clock = 0;
  ProcessId id{};

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

enum class MaekawaMode : std::uint8_t { Basic, Full };

enum class MaekawaKind : std::uint8_t { Request, Locked, Release, Failed, Inquire, Relinquish };

constexpr std::string_view to_string(MaekawaKind k) noexcept {
  switch (k) {
    case MaekawaKind::Request: return "REQUEST";
    case MaekawaKind::Locked: return "LOCKED";
    case MaekawaKind::Release: return "RELEASE";
    case MaekawaKind::Failed: return "FAILED";
    case MaekawaKind::Inquire: return "INQUIRE";
    case MaekawaKind::Relinquish: return "RELINQUISH";
  }
  return "?";
}

struct MaekawaMessage {
  MaekawaKind kind = MaekawaKind::Request;
  ProcessId origin{};            // sender
  std::optional<Timestamp> ts;   // REQUEST only

  friend bool operator==(const MaekawaMessage&, const MaekawaMessage&) = default;
};

struct PendingRequest {
  Timestamp ts;
  ProcessId origin{};
  bool failed_sent = false;

  friend bool operator==(const PendingRequest&, const PendingRequest&) = default;
};

struct LockHolder {
  ProcessId origin{};
  Timestamp ts;

  friend bool operator==(const LockHolder&, const LockHolder&) = default;
};

struct OwnRequest {
  Timestamp ts;
  std::set<ProcessId> grants;
  // Arbiters that reported FAILED (or were relinquished) and have not
  // granted since.
  std::set<ProcessId> faileds;
  // INQUIREs received before any FAILED; answered once one arrives.
  std::set<ProcessId> deferred_inquiries;

  friend bool operator==(const OwnRequest&, const OwnRequest&) = default;
};

struct MaekawaNodeState {
  ProcessId id{};
  std::uint64_t clock = 0;
  MaekawaMode mode = MaekawaMode::Basic;
  Stat stat = Stat::Passive;

  // arbiter role
  std::optional<LockHolder> locked_for;
  bool inquire_sent = false;
  std::vector<PendingRequest> pending;  // FIFO in basic mode, ascending ts in full mode

  // requester role
  std::optional<OwnRequest> requesting;

  friend bool operator==(const MaekawaNodeState&, const MaekawaNodeState&) = default;
};

struct MaekawaStep {
  MaekawaNodeState state;
  std::vector<Outgoing<MaekawaMessage>> outbox;
};

inline MaekawaNodeState make_maekawa_node(ProcessId id, MaekawaMode mode) {
  MaekawaNodeState s;
  s.id = id;
  s.mode = mode;
  return s;
}

namespace mk_detail {

inline std::string who(ProcessId p) { return std::to_string(to_int(p)); }

inline void grant(MaekawaNodeState& s, PendingRequest next, std::vector<Outgoing<MaekawaMessage>>& out) {
  s.locked_for = LockHolder{next.origin, next.ts};
  s.inquire_sent = false;
  out.push_back({next.origin, {MaekawaKind::Locked, s.id, std::nullopt}});
}

inline void grant_next(MaekawaNodeState& s, std::vector<Outgoing<MaekawaMessage>>& out) {
  s.locked_for.reset();
  s.inquire_sent = false;
  if (s.pending.empty()) return;
  // full mode keeps pending sorted, so front is the minimum timestamp
  PendingRequest next = s.pending.front();
  s.pending.erase(s.pending.begin());
  grant(s, next, out);
}

inline void relinquish(MaekawaNodeState& s, ProcessId arbiter, std::vector<Outgoing<MaekawaMessage>>& out) {
  s.requesting->grants.erase(arbiter);
  s.requesting->faileds.insert(arbiter);
  out.push_back({arbiter, {MaekawaKind::Relinquish, s.id, std::nullopt}});
}

inline void on_request(MaekawaNodeState& s, ProcessId from, Timestamp ts,
                       std::vector<Outgoing<MaekawaMessage>>& out) {
  if (!s.locked_for) {
    grant(s, PendingRequest{ts, from, false}, out);
    return;
  }
  if (s.mode == MaekawaMode::Basic) {
    s.pending.push_back({ts, from, false});
    return;
  }
  auto pos = std::lower_bound(s.pending.begin(), s.pending.end(), ts,
                              [](const PendingRequest& p, const Timestamp& t) { return p.ts < t; });
  const bool preceded = s.locked_for->ts < ts || pos != s.pending.begin();
  pos = s.pending.insert(pos, {ts, from, preceded});
  if (preceded) {
    out.push_back({from, {MaekawaKind::Failed, s.id, std::nullopt}});
    return;
  }
  // New best pending request: everyone queued behind it will wait at least
  // one more turn.
  for (auto it = std::next(pos); it != s.pending.end(); ++it) {
    if (!it->failed_sent) {
      it->failed_sent = true;
      out.push_back({it->origin, {MaekawaKind::Failed, s.id, std::nullopt}});
    }
  }
  if (!s.inquire_sent) {
    s.inquire_sent = true;
    out.push_back({s.locked_for->origin, {MaekawaKind::Inquire, s.id, std::nullopt}});
  }
}

}  // namespace mk_detail

inline MaekawaStep mk_request_cs(const QuorumSystem& qs, MaekawaNodeState s) {
  if (s.stat != Stat::Passive) throw NotPassive(to_int(s.id));
  MaekawaStep out;
  ++s.clock;
  Timestamp ts{s.clock, s.id};
  s.requesting = OwnRequest{ts, {}, {}, {}};
  s.stat = Stat::Wait;
  for (ProcessId m : qs.group(s.id)) out.outbox.push_back({m, {MaekawaKind::Request, s.id, ts}});
  out.state = std::move(s);
  return out;
}

inline MaekawaStep mk_on_message(const QuorumSystem& qs, MaekawaNodeState s, ProcessId from,
                                 const MaekawaMessage& msg) {
  using mk_detail::who;
  MaekawaStep out;
  auto& ob = out.outbox;
  s.clock = std::max(s.clock, msg.ts ? msg.ts->clock : 0) + 1;

  if (s.mode == MaekawaMode::Basic &&
      (msg.kind == MaekawaKind::Failed || msg.kind == MaekawaKind::Inquire ||
       msg.kind == MaekawaKind::Relinquish))
    throw UnexpectedMessage(std::string(to_string(msg.kind)) + " in basic mode at " + who(s.id));

  switch (msg.kind) {
    case MaekawaKind::Request:
      if (!msg.ts) throw UnexpectedMessage("REQUEST without timestamp from " + who(from));
      mk_detail::on_request(s, from, *msg.ts, ob);
      break;

    case MaekawaKind::Locked: {
      if (s.stat != Stat::Wait || !s.requesting)
        throw UnexpectedMessage("LOCKED from " + who(from) + " at non-waiting " + who(s.id));
      auto& r = *s.requesting;
      r.grants.insert(from);
      r.faileds.erase(from);
      r.deferred_inquiries.erase(from);
      auto g = qs.group(s.id);
      if (r.grants.size() == g.size() && std::equal(g.begin(), g.end(), r.grants.begin())) {
        s.stat = Stat::Ready;
        r.deferred_inquiries.clear();
      }
      break;
    }

    case MaekawaKind::Failed: {
      if (s.stat != Stat::Wait || !s.requesting)
        throw UnexpectedMessage("FAILED from " + who(from) + " at non-waiting " + who(s.id));
      auto& r = *s.requesting;
      r.faileds.insert(from);
      auto deferred = std::move(r.deferred_inquiries);
      r.deferred_inquiries.clear();
      for (ProcessId arbiter : deferred)
        if (r.grants.contains(arbiter)) mk_detail::relinquish(s, arbiter, ob);
      break;
    }

    case MaekawaKind::Inquire: {
      // stale once we released, entered, or already gave this lock back
      if (s.stat != Stat::Wait || !s.requesting || !s.requesting->grants.contains(from)) break;
      if (!s.requesting->faileds.empty())
        mk_detail::relinquish(s, from, ob);
      else
        s.requesting->deferred_inquiries.insert(from);
      break;
    }

    case MaekawaKind::Relinquish: {
      if (!s.locked_for || s.locked_for->origin != from)
        throw UnexpectedMessage("RELINQUISH from non-holder " + who(from) + " at " + who(s.id));
      PendingRequest demoted{s.locked_for->ts, from, true};
      auto pos = std::lower_bound(s.pending.begin(), s.pending.end(), demoted.ts,
                                  [](const PendingRequest& p, const Timestamp& t) { return p.ts < t; });
      s.pending.insert(pos, demoted);
      mk_detail::grant_next(s, ob);
      break;
    }

    case MaekawaKind::Release:
      if (!s.locked_for || s.locked_for->origin != from)
        throw UnexpectedMessage("RELEASE from non-holder " + who(from) + " at " + who(s.id));
      mk_detail::grant_next(s, ob);
      break;
  }
  out.state = std::move(s);
  return out;
}

inline MaekawaStep mk_release_cs(const QuorumSystem& qs, MaekawaNodeState s) {
  if (s.stat != Stat::Ready) throw NotInCriticalSection(to_int(s.id));
  MaekawaStep out;
  for (ProcessId m : qs.group(s.id)) out.outbox.push_back({m, {MaekawaKind::Release, s.id, std::nullopt}});
  s.stat = Stat::Passive;
  s.requesting.reset();
  out.state = std::move(s);
  return out;
}

// (waiter, arbiter, holder) for every request parked behind a lock.
inline std::vector<WaitEdge> mk_wait_for_edges(const MaekawaNodeState& s) {
  std::vector<WaitEdge> edges;
  if (!s.locked_for) return edges;
  for (const auto& p : s.pending) edges.push_back({p.origin, s.id, s.locked_for->origin});
  return edges;
}

inline std::optional<std::string> mk_check_invariants(const QuorumSystem& qs, const MaekawaNodeState& s) {
  const auto who = mk_detail::who;
  if (s.stat == Stat::Ready) {
    auto g = qs.group(s.id);
    if (!s.requesting || s.requesting->grants.size() != g.size())
      return "node " + who(s.id) + " is Ready without every grant";
  }
  if (s.locked_for)
    for (const auto& p : s.pending)
      if (p.origin == s.locked_for->origin) return "node " + who(s.id) + " has its lock holder pending";
  return std::nullopt;
}

}  // namespace ringmx
