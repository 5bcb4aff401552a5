#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace spr {

enum class AgentRole { Analyzer, Grounder, Synthesizer };

std::string_view to_string(AgentRole role);
AgentRole role_from_string(std::string_view text);

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// One call to an agent. node_id/statement/step identify the work item so
// scripted doubles can answer without parsing the transcript; attempt is the
// 0-based retry index.
struct AgentRequest {
  AgentRole role = AgentRole::Grounder;
  std::string node_id;
  std::string statement;
  int step = 0;
  int attempt = 0;
  std::vector<ChatMessage> messages;
};

class Agent {
 public:
  virtual ~Agent() = default;
  // Returns the raw response text. Transport failures throw Error(Transport).
  virtual std::string complete(const AgentRequest& request) = 0;
};

class FunctionAgent final : public Agent {
 public:
  using Fn = std::function<std::string(const AgentRequest&)>;
  explicit FunctionAgent(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const AgentRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

struct AgentConfig {
  AgentRole role = AgentRole::Grounder;
  std::string endpoint;
  std::string model;
  double temperature = 0.1;
  int max_exception_retry = 3;
  int max_interrupt_times = 5;  // tool-call loops only
  std::optional<std::string> knowledge_cutoff;  // YYYY-MM-DD
  int max_concurrent_calls = 20;

  // Throws Error(InvalidConfig) on negative retries or temperature.
  void validate() const;

  // Overrides endpoint/model from AGENT_ENDPOINT_<ROLE> / AGENT_MODEL_<ROLE>
  // and the cutoff from SEARCH_CUTOFF when those are set.
  AgentConfig with_env_overrides() const;

  static AgentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// FNV-1a (64-bit) of the lowercased, whitespace-collapsed, trimmed statement.
std::uint64_t statement_hash(std::string_view statement);
std::string statement_hash_key(std::string_view statement);  // "#<16 hex digits>"

}  // namespace spr
