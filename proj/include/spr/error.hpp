#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spr {

enum class ErrorCode {
  InvalidInput,
  NotFound,
  IdConflict,
  SchemaMismatch,
  CoefficientError,
  ParseError,
  UnboundVariable,
  Unsupported,
  MixedRules,
  ConstraintViolation,
  TooLarge,
  TemplateError,
  MissingPayload,
  PayloadSyntax,
  AgentExhausted,
  Transport,
  InvalidConfig,
  RunFailed,
  InvalidSpec,
  InsufficientRuns,
  IntegrityError,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure the engine reports is an spr::Error. `retryable` marks
// validation failures an agent may fix when re-prompted.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, bool retryable = false);

  ErrorCode code() const noexcept { return code_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  ErrorCode code_;
  bool retryable_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t token_index, std::size_t offset);

  // 1-based index of the offending token; offset is the byte position.
  std::size_t token_index() const noexcept { return token_index_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t token_index_;
  std::size_t offset_;
};

struct Violation {
  std::string kind;
  std::optional<std::string> node;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

}  // namespace spr
