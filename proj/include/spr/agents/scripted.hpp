#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/agents/agent.hpp"

namespace spr {

// Deterministic agent double driven by a fixture document:
//
//   {"outputs": {"P1": <answer>, "P0@2": <answer>, "#<statement hash>": <answer>},
//    "default": <answer>}
//
// An answer is response text or a JSON payload (object or list, wrapped in a
// ```json block after a one-line report). {"attempts": [a0, a1, ...]} gives
// one answer per retry attempt; the last entry repeats. Lookup order: "<id>@<step>", "#<hash>@<step>", "<id>",
// "#<hash>", default. A miss throws Error(NotFound).
class ScriptedAgent final : public Agent {
 public:
  explicit ScriptedAgent(const nlohmann::json& fixture);
  static ScriptedAgent from_file(const std::string& path);

  std::string complete(const AgentRequest& request) override;

 private:
  std::map<std::string, std::vector<nlohmann::json>> outputs_;
  std::vector<nlohmann::json> fallback_;
};

// Renders `payload` the way a well-behaved agent would.
std::string fenced_response(const std::string& report, const nlohmann::json& payload);

}  // namespace spr
