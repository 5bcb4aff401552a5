#pragma once

#include <atomic>
#include <functional>
#include <string>

#include "spr/agents/agent.hpp"
#include "spr/agents/prompts.hpp"
#include "spr/error.hpp"

namespace spr {

class AgentExhaustedError : public Error {
 public:
  AgentExhaustedError(const std::string& message, std::string last_response, int attempts)
      : Error(ErrorCode::AgentExhausted, message), last_response_(std::move(last_response)), attempts_(attempts) {}

  const std::string& last_response() const noexcept { return last_response_; }
  int attempts() const noexcept { return attempts_; }

 private:
  std::string last_response_;
  int attempts_;
};

// Shared, thread-safe call accounting.
struct CallCounters {
  std::atomic<long> calls{0};
  std::atomic<long> retries{0};
};

// Calls `agent`, validating each response with `validate`. A retryable
// spr::Error appends the raw answer and a feedback turn to the transcript and
// re-calls, up to `max_retries` extra times. Non-retryable errors propagate.
template <typename Validate>
auto call_with_retry(Agent& agent, AgentRequest request, Validate&& validate, int max_retries,
                     CallCounters* counters = nullptr) -> decltype(validate(std::string{})) {
  std::string last;
  std::string last_reason;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    request.attempt = attempt;
    if (counters) {
      ++counters->calls;
      if (attempt > 0) ++counters->retries;
    }
    last = agent.complete(request);
    try {
      return validate(last);
    } catch (const Error& e) {
      if (!e.retryable()) throw;
      last_reason = e.what();
      request.messages.push_back({"assistant", last});
      request.messages.push_back({"user", render_prompt("retry_feedback", {{"reason", last_reason}})});
    }
  }
  throw AgentExhaustedError("agent output still invalid after " + std::to_string(max_retries + 1) +
                                " attempts: " + last_reason,
                            last, max_retries + 1);
}

}  // namespace spr
