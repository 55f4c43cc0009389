#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace simgen {

enum class Errc {
  InvalidRange,
  BadPalette,
  Io,
  Decode,
  BadParams,
  DegenerateMode,
  EmptyField,
  NotUnit,
  ShapeMismatch,
  Unstable,
  Parse,
  ExpansionTooLarge,
  UnbalancedBrackets,
  EmptyOutput,
  NoRoots,
  EmptyGraph,
  ZeroMass,
  BadModel,
  GlyphTooLarge,
  WordTooLong,
  NoPoints,
  InsufficientFamilies,
  InsufficientSeeds,
  DimensionMismatch,
  JudgeTimeout,
  JudgeMalformed,
  JudgeUnavailable,
  EmptyResults,
  UnknownFamily,
  MalformedTrials,
  PortBusy,
  SessionExpired,
  OutOfRange,
  AlreadyAnswered,
  UnknownTrial,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure in the library surfaces as this exception; `code()` tells
/// callers (and the CLI exit-code mapping) which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace simgen
