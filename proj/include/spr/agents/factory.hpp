#pragma once

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "spr/agents/agent.hpp"

namespace spr {

// Builds an agent from its spec:
//   {"kind": "scripted", "fixture": {...}}  or  {"kind": "scripted", "path": "answers.json"}
//   {"kind": "remote", "endpoint": "http://...", "model": "...", ...}  (AgentConfig keys)
// Relative fixture paths resolve against base_dir. Remote specs honour the
// AGENT_* / SEARCH_CUTOFF environment overrides. Throws Error(InvalidConfig).
std::unique_ptr<Agent> make_agent(const nlohmann::json& spec, AgentRole role,
                                  const std::filesystem::path& base_dir = {});

}  // namespace spr
