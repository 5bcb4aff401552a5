#include "spr/agents/agent.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>

#include "spr/error.hpp"

namespace spr {

std::string_view to_string(AgentRole role) {
  switch (role) {
    case AgentRole::Analyzer: return "analyzer";
    case AgentRole::Grounder: return "grounder";
    case AgentRole::Synthesizer: return "synthesizer";
  }
  return "grounder";
}

AgentRole role_from_string(std::string_view text) {
  if (text == "analyzer") return AgentRole::Analyzer;
  if (text == "grounder") return AgentRole::Grounder;
  if (text == "synthesizer") return AgentRole::Synthesizer;
  throw Error(ErrorCode::InvalidConfig, "unknown agent role '" + std::string(text) + "'");
}

void AgentConfig::validate() const {
  if (max_exception_retry < 0) throw Error(ErrorCode::InvalidConfig, "max_exception_retry must be >= 0");
  if (max_interrupt_times < 0) throw Error(ErrorCode::InvalidConfig, "max_interrupt_times must be >= 0");
  if (temperature < 0.0) throw Error(ErrorCode::InvalidConfig, "temperature must be >= 0");
  if (max_concurrent_calls < 1) throw Error(ErrorCode::InvalidConfig, "max_concurrent_calls must be >= 1");
}

AgentConfig AgentConfig::with_env_overrides() const {
  AgentConfig out = *this;
  std::string suffix(to_string(role));
  for (char& c : suffix) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (const char* e = std::getenv(("AGENT_ENDPOINT_" + suffix).c_str())) out.endpoint = e;
  if (const char* m = std::getenv(("AGENT_MODEL_" + suffix).c_str())) out.model = m;
  if (const char* c = std::getenv("SEARCH_CUTOFF")) out.knowledge_cutoff = c;
  return out;
}

AgentConfig AgentConfig::from_json(const nlohmann::json& doc) {
  AgentConfig c;
  c.role = role_from_string(doc.value("role", std::string("grounder")));
  c.endpoint = doc.value("endpoint", std::string());
  c.model = doc.value("model", std::string());
  c.temperature = doc.value("temperature", 0.1);
  c.max_exception_retry = doc.value("max_exception_retry", 3);
  c.max_interrupt_times = doc.value("max_interrupt_times", 5);
  c.max_concurrent_calls = doc.value("max_concurrent_calls", 20);
  if (doc.contains("knowledge_cutoff") && doc["knowledge_cutoff"].is_string())
    c.knowledge_cutoff = doc["knowledge_cutoff"].get<std::string>();
  c.validate();
  return c;
}

nlohmann::json AgentConfig::to_json() const {
  nlohmann::json doc = {
      {"role", std::string(to_string(role))},
      {"endpoint", endpoint},
      {"model", model},
      {"temperature", temperature},
      {"max_exception_retry", max_exception_retry},
      {"max_interrupt_times", max_interrupt_times},
      {"max_concurrent_calls", max_concurrent_calls},
  };
  doc["knowledge_cutoff"] = knowledge_cutoff ? nlohmann::json(*knowledge_cutoff) : nlohmann::json(nullptr);
  return doc;
}

std::uint64_t statement_hash(std::string_view statement) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  bool pending_space = false;
  bool started = false;
  for (char raw : statement) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      pending_space = started;
      continue;
    }
    if (pending_space) mix(' ');
    pending_space = false;
    started = true;
    mix(static_cast<unsigned char>(std::tolower(c)));
  }
  return h;
}

std::string statement_hash_key(std::string_view statement) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "#%016llx", static_cast<unsigned long long>(statement_hash(statement)));
  return buf;
}

}  // namespace spr
