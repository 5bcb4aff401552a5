#include "spr/agents/scripted.hpp"

#include <fstream>
#include <sstream>

#include "spr/error.hpp"

namespace spr {
namespace {

std::vector<nlohmann::json> as_sequence(const nlohmann::json& answer) {
  if (answer.is_object() && answer.size() == 1 && answer.contains("attempts")) {
    const auto& seq = answer["attempts"];
    if (!seq.is_array() || seq.empty()) throw Error(ErrorCode::InvalidConfig, "\"attempts\" must be a non-empty list");
    return std::vector<nlohmann::json>(seq.begin(), seq.end());
  }
  return {answer};
}

}  // namespace

std::string fenced_response(const std::string& report, const nlohmann::json& payload) {
  return report + "\n\n```json\n" + payload.dump(2) + "\n```\n";
}

ScriptedAgent::ScriptedAgent(const nlohmann::json& fixture) {
  if (!fixture.is_object()) throw Error(ErrorCode::InvalidConfig, "scripted fixture must be an object");
  if (auto it = fixture.find("outputs"); it != fixture.end()) {
    if (!it->is_object()) throw Error(ErrorCode::InvalidConfig, "\"outputs\" must be an object");
    for (const auto& [key, answer] : it->items()) outputs_[key] = as_sequence(answer);
  }
  if (auto it = fixture.find("default"); it != fixture.end() && !it->is_null()) fallback_ = as_sequence(*it);
}

ScriptedAgent ScriptedAgent::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open fixture " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto doc = nlohmann::json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::InvalidConfig, "fixture " + path + " is not valid JSON");
  return ScriptedAgent(doc);
}

std::string ScriptedAgent::complete(const AgentRequest& request) {
  const std::vector<nlohmann::json>* seq = nullptr;
  const std::string step = "@" + std::to_string(request.step);
  const std::string hash = statement_hash_key(request.statement);
  for (const std::string& key : {request.node_id + step, hash + step, request.node_id, hash}) {
    auto it = outputs_.find(key);
    if (it != outputs_.end()) {
      seq = &it->second;
      break;
    }
  }
  if (!seq && !fallback_.empty()) seq = &fallback_;
  if (!seq)
    throw Error(ErrorCode::NotFound,
                "scripted " + std::string(to_string(request.role)) + " has no answer for " + request.node_id);
  std::size_t index = std::min<std::size_t>(static_cast<std::size_t>(request.attempt), seq->size() - 1);
  const nlohmann::json& answer = (*seq)[index];
  if (answer.is_string()) return answer.get<std::string>();
  return fenced_response("Scripted " + std::string(to_string(request.role)) + " answer for " + request.node_id + ".",
                         answer);
}

}  // namespace spr
