#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "spr/synthesis/record.hpp"

namespace spr {

enum class RecursionMode { Parallel, Sequential };

struct RunConfig {
  int max_leaves = 10;  // L_max
  int max_steps = 5;    // T_max
  RuleKind rule = RuleKind::Linear;
  int max_concurrent_prove = 20;
  int max_proof_retries = 3;
  int max_exception_retry = 3;
  int recursion_depth = 1;
  RecursionMode recursion_mode = RecursionMode::Parallel;
  std::optional<int> recursion_leaf_budget;  // sequential mode only
  std::optional<double> decision_threshold;
  std::uint64_t seed = 0;
  double intercept_bound = kDefaultInterceptBound;
  double failure_p_true = 0.5;
  std::optional<std::string> current_date;  // handed to grounders; defaults to today (UTC)
  std::optional<std::string> created_at;    // pins the tree timestamp

  // Throws Error(InvalidConfig).
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults. Throws Error(InvalidConfig).
  static RunConfig from_json(const nlohmann::json& doc);
};

}  // namespace spr
