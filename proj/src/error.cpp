#include "spr/error.hpp"

namespace spr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::IdConflict: return "IdConflict";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::CoefficientError: return "CoefficientError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::MixedRules: return "MixedRules";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::MissingPayload: return "MissingPayload";
    case ErrorCode::PayloadSyntax: return "PayloadSyntax";
    case ErrorCode::AgentExhausted: return "AgentExhausted";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::RunFailed: return "RunFailed";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InsufficientRuns: return "InsufficientRuns";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, bool retryable)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      retryable_(retryable) {}

ParseError::ParseError(const std::string& message, std::size_t token_index, std::size_t offset)
    : Error(ErrorCode::ParseError,
            message + " (token " + std::to_string(token_index) + ", offset " + std::to_string(offset) + ")",
            true),
      token_index_(token_index),
      offset_(offset) {}

}  // namespace spr
