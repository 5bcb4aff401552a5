#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "spr/core/node_id.hpp"
#include "spr/synthesis/formula.hpp"

namespace spr {

inline constexpr double kDefaultInterceptBound = 0.1;

enum class RuleKind { Vanilla, Linear, SimpleLogic, NoisyOr, Average };

std::string_view to_string(RuleKind rule);
RuleKind rule_from_string(std::string_view text);

using ChildValues = std::map<NodeId, double>;

// parent = beta0 + sum_j betas[j] * child_j
struct LinearRecord {
  double beta0 = 0.0;
  std::map<NodeId, double> betas;
  std::string key_factor;

  friend bool operator==(const LinearRecord&, const LinearRecord&) = default;
};

struct LogicRecord {
  Formula formula;
  std::string assumption_detail;
  double assumption_probability = 0.0;
  std::string key_factor;

  friend bool operator==(const LogicRecord&, const LogicRecord&) = default;
};

// Free-form synthesis: the agent states p_true directly.
struct VanillaRecord {
  std::string key_factor;
  friend bool operator==(const VanillaRecord&, const VanillaRecord&) = default;
};

// Leak beta0 plus per-child activation strengths, all in [0,1].
struct NoisyOrRecord {
  LinearRecord coefficients;
  friend bool operator==(const NoisyOrRecord&, const NoisyOrRecord&) = default;
};

struct AverageRecord {
  std::string key_factor;
  friend bool operator==(const AverageRecord&, const AverageRecord&) = default;
};

using SynthesisRecord = std::variant<VanillaRecord, LinearRecord, LogicRecord, NoisyOrRecord, AverageRecord>;

RuleKind rule_of(const SynthesisRecord& record);
const std::string& key_factor_of(const SynthesisRecord& record);

// Wire shapes, e.g. {"rule":"linear","beta":{"beta_0":0.05,"P1":0.2},"key_factor":"..."}.
nlohmann::json record_to_json(const SynthesisRecord& record);
// Throws Error(SchemaMismatch) or spr::ParseError on malformed input.
SynthesisRecord record_from_json(const nlohmann::json& doc);

// Parses a {"beta_0": x, "<child>": y, ...} object.
LinearRecord linear_from_beta_map(const nlohmann::json& beta, std::string key_factor);
nlohmann::json beta_map_to_json(const LinearRecord& record);

}  // namespace spr
