#pragma once

#include <cstdint>
#include <string_view>

namespace ringmx {

enum class ProcessId : std::int32_t {};

constexpr ProcessId pid(int v) noexcept { return ProcessId{v}; }
constexpr int to_int(ProcessId p) noexcept { return static_cast<int>(p); }

// Passive = not requesting, Wait = requesting, Ready = in critical section.
enum class Stat : std::uint8_t { Passive, Wait, Ready };

constexpr std::string_view to_string(Stat s) noexcept {
  switch (s) {
    case Stat::Passive: return "Passive";
    case Stat::Wait: return "Wait";
    case Stat::Ready: return "Ready";
  }
  return "?";
}

template <class Message>
struct Outgoing {
  ProcessId to{};
  Message msg{};

  friend bool operator==(const Outgoing&, const Outgoing&) = default;
};

// "waiter is queued at node `at` behind holder".
struct WaitEdge {
  ProcessId waiter{};
  ProcessId at{};
  ProcessId holder{};

  friend auto operator<=>(const WaitEdge&, const WaitEdge&) = default;
};

}  // namespace ringmx
