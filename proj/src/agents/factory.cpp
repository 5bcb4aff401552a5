#include "spr/agents/factory.hpp"

#include "spr/agents/remote.hpp"
#include "spr/agents/scripted.hpp"
#include "spr/error.hpp"

namespace spr {

std::unique_ptr<Agent> make_agent(const nlohmann::json& spec, AgentRole role, const std::filesystem::path& base_dir) {
  if (!spec.is_object()) throw Error(ErrorCode::InvalidConfig, "agent spec must be an object");
  std::string kind = spec.value("kind", std::string());
  if (kind == "scripted") {
    if (spec.contains("fixture")) return std::make_unique<ScriptedAgent>(spec["fixture"]);
    if (spec.contains("path") && spec["path"].is_string()) {
      std::filesystem::path path = spec["path"].get<std::string>();
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      return std::make_unique<ScriptedAgent>(ScriptedAgent::from_file(path.string()));
    }
    throw Error(ErrorCode::InvalidConfig, "scripted agent needs \"fixture\" or \"path\"");
  }
  if (kind == "remote") {
    nlohmann::json doc = spec;
    doc.erase("kind");
    doc["role"] = std::string(to_string(role));
    AgentConfig config = AgentConfig::from_json(doc).with_env_overrides();
    if (config.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "remote agent needs an endpoint");
    return std::make_unique<RemoteChatAgent>(std::move(config));
  }
  throw Error(ErrorCode::InvalidConfig, "agent kind must be \"scripted\" or \"remote\"");
}

}  // namespace spr
