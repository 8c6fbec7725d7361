#pragma once

#include <stdexcept>
#include <string>

namespace ringmx {

// Base of every error raised by the library. Validation failures and
// deadlocks are reported as values, not thrown.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoValidK : Error {
  explicit NoValidK(long n)
      : Error("no integer k satisfies k(k-1)+1 = " + std::to_string(n)), n(n) {}
  long n;
};

struct ConstructionFailed : Error {
  explicit ConstructionFailed(long n)
      : Error("no quorum system found for n = " + std::to_string(n)), n(n) {}
  long n;
};

struct MalformedQuorum : Error {
  using Error::Error;
};

struct UnknownProcess : Error {
  explicit UnknownProcess(int id) : Error("unknown process " + std::to_string(id)) {}
};

struct NotAMember : Error {
  NotAMember(int member, int origin)
      : Error("process " + std::to_string(member) + " is not in the ring of " +
              std::to_string(origin)) {}
};

struct NotPassive : Error {
  explicit NotPassive(int id)
      : Error("process " + std::to_string(id) + " is already requesting") {}
};

struct NotInCriticalSection : Error {
  explicit NotInCriticalSection(int id)
      : Error("process " + std::to_string(id) + " is not in the critical section") {}
};

struct UnexpectedMessage : Error {
  using Error::Error;
};

struct InvalidScenario : Error {
  using Error::Error;
};

struct ReplayDivergence : Error {
  using Error::Error;
};

}  // namespace ringmx
