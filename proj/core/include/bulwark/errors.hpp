#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bulwark {

enum class Errc {
  ParseError,
  ValidationError,
  UnknownBlock,
  UnknownInstruction,
  UnknownKind,
  DisabledPass,
  StaleManifest,
  PresenceViolation,
  DanglingReference,
  InconsistentInput,
  InfeasibleRequirements,
  IterationLimitExceeded,
  FinalizationInconsistent,
  FalseAlarm,
  CycleRemains,
  IoError,
  UsageError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::int64_t subject = -1)
      : std::runtime_error(std::move(message)), code_(code), subject_(subject) {}

  Errc code() const { return code_; }
  // Offending entity (manifest id for FalseAlarm, instruction id, ...); -1 if n/a.
  std::int64_t subject() const { return subject_; }

 private:
  Errc code_;
  std::int64_t subject_;
};

[[noreturn]] inline void fail(Errc code, std::string message, std::int64_t subject = -1) {
  throw Error(code, std::move(message), subject);
}

}  // namespace bulwark
