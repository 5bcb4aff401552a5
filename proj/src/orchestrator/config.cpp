#include "spr/orchestrator/config.hpp"

#include <set>

#include "spr/error.hpp"

namespace spr {
namespace {

template <typename T>
T read(const nlohmann::json& doc, const char* key, T fallback) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::InvalidConfig, std::string("config key \"") + key + "\" has the wrong type");
  }
}

}  // namespace

void RunConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (max_leaves < 1) bad("L_max must be at least 1");
  if (max_steps < 1) bad("T_max must be at least 1");
  if (max_concurrent_prove < 1) bad("concurrency must be at least 1");
  if (recursion_depth < 1) bad("recursion depth n must be at least 1");
  if (max_proof_retries < 0 || max_exception_retry < 0) bad("retry counts must be non-negative");
  if (decision_threshold && !(*decision_threshold >= 0.0 && *decision_threshold <= 1.0))
    bad("decision threshold must lie in [0,1]");
  if (!(intercept_bound >= 0.0)) bad("intercept bound must be non-negative");
  if (!(failure_p_true >= 0.0 && failure_p_true <= 1.0)) bad("failure p_true must lie in [0,1]");
  if (recursion_leaf_budget && *recursion_leaf_budget < 1) bad("recursion leaf budget must be at least 1");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json doc = {
      {"L_max", max_leaves},
      {"T_max", max_steps},
      {"rule", to_string(rule)},
      {"concurrency", max_concurrent_prove},
      {"max_proof_retries", max_proof_retries},
      {"max_exception_retry", max_exception_retry},
      {"n", recursion_depth},
      {"recursion_mode", recursion_mode == RecursionMode::Parallel ? "parallel" : "sequential"},
      {"seed", seed},
      {"intercept_bound", intercept_bound},
      {"failure_p_true", failure_p_true},
  };
  doc["decision_threshold"] = decision_threshold ? nlohmann::json(*decision_threshold) : nlohmann::json(nullptr);
  if (recursion_leaf_budget) doc["recursion_leaf_budget"] = *recursion_leaf_budget;
  if (current_date) doc["current_date"] = *current_date;
  if (created_at) doc["created_at"] = *created_at;
  return doc;
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "run config must be an object");
  static const std::set<std::string> known = {
      "L_max",          "T_max",           "rule",       "concurrency",        "max_proof_retries",
      "max_exception_retry", "n",          "recursion_mode", "recursion_leaf_budget", "decision_threshold",
      "seed",           "intercept_bound", "failure_p_true", "current_date",     "created_at"};
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown run config key \"" + key + "\"");

  RunConfig c;
  c.max_leaves = read(doc, "L_max", c.max_leaves);
  c.max_steps = read(doc, "T_max", c.max_steps);
  if (doc.contains("rule")) {
    try {
      c.rule = rule_from_string(read<std::string>(doc, "rule", ""));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, e.what());
    }
  }
  c.max_concurrent_prove = read(doc, "concurrency", c.max_concurrent_prove);
  c.max_proof_retries = read(doc, "max_proof_retries", c.max_proof_retries);
  c.max_exception_retry = read(doc, "max_exception_retry", c.max_exception_retry);
  c.recursion_depth = read(doc, "n", c.recursion_depth);
  std::string mode = read<std::string>(doc, "recursion_mode", "parallel");
  if (mode == "parallel")
    c.recursion_mode = RecursionMode::Parallel;
  else if (mode == "sequential")
    c.recursion_mode = RecursionMode::Sequential;
  else
    throw Error(ErrorCode::InvalidConfig, "recursion_mode must be parallel or sequential");
  if (doc.contains("recursion_leaf_budget") && !doc["recursion_leaf_budget"].is_null())
    c.recursion_leaf_budget = read(doc, "recursion_leaf_budget", 0);
  if (doc.contains("decision_threshold") && !doc["decision_threshold"].is_null())
    c.decision_threshold = read(doc, "decision_threshold", 0.0);
  c.seed = read<std::uint64_t>(doc, "seed", c.seed);
  c.intercept_bound = read(doc, "intercept_bound", c.intercept_bound);
  c.failure_p_true = read(doc, "failure_p_true", c.failure_p_true);
  if (doc.contains("current_date") && !doc["current_date"].is_null())
    c.current_date = read<std::string>(doc, "current_date", "");
  if (doc.contains("created_at") && !doc["created_at"].is_null())
    c.created_at = read<std::string>(doc, "created_at", "");
  c.validate();
  return c;
}

}  // namespace spr
