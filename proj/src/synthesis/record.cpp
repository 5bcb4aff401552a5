#include "spr/synthesis/record.hpp"

#include "spr/error.hpp"

namespace spr {

std::string_view to_string(RuleKind rule) {
  switch (rule) {
    case RuleKind::Vanilla: return "vanilla";
    case RuleKind::Linear: return "linear";
    case RuleKind::SimpleLogic: return "simple_logic";
    case RuleKind::NoisyOr: return "noisy_or";
    case RuleKind::Average: return "average";
  }
  return "unknown";
}

RuleKind rule_from_string(std::string_view text) {
  if (text == "vanilla") return RuleKind::Vanilla;
  if (text == "linear") return RuleKind::Linear;
  if (text == "simple_logic" || text == "simple-logic") return RuleKind::SimpleLogic;
  if (text == "noisy_or" || text == "noisy-or") return RuleKind::NoisyOr;
  if (text == "average") return RuleKind::Average;
  throw Error(ErrorCode::InvalidInput, "unknown synthesis rule '" + std::string(text) + "'");
}

RuleKind rule_of(const SynthesisRecord& record) {
  struct {
    RuleKind operator()(const VanillaRecord&) const { return RuleKind::Vanilla; }
    RuleKind operator()(const LinearRecord&) const { return RuleKind::Linear; }
    RuleKind operator()(const LogicRecord&) const { return RuleKind::SimpleLogic; }
    RuleKind operator()(const NoisyOrRecord&) const { return RuleKind::NoisyOr; }
    RuleKind operator()(const AverageRecord&) const { return RuleKind::Average; }
  } visitor;
  return std::visit(visitor, record);
}

const std::string& key_factor_of(const SynthesisRecord& record) {
  struct {
    const std::string& operator()(const VanillaRecord& r) const { return r.key_factor; }
    const std::string& operator()(const LinearRecord& r) const { return r.key_factor; }
    const std::string& operator()(const LogicRecord& r) const { return r.key_factor; }
    const std::string& operator()(const NoisyOrRecord& r) const { return r.coefficients.key_factor; }
    const std::string& operator()(const AverageRecord& r) const { return r.key_factor; }
  } visitor;
  return std::visit(visitor, record);
}

LinearRecord linear_from_beta_map(const nlohmann::json& beta, std::string key_factor) {
  if (!beta.is_object()) throw Error(ErrorCode::SchemaMismatch, "\"beta\" must be an object", true);
  LinearRecord record;
  record.key_factor = std::move(key_factor);
  bool has_intercept = false;
  for (const auto& [key, value] : beta.items()) {
    if (!value.is_number())
      throw Error(ErrorCode::SchemaMismatch, "beta '" + key + "' is not a number", true);
    if (key == "beta_0") {
      record.beta0 = value.get<double>();
      has_intercept = true;
      continue;
    }
    if (!NodeId::is_valid(key))
      throw Error(ErrorCode::SchemaMismatch, "beta key '" + key + "' is not a proposition id", true);
    record.betas[NodeId::parse(key)] = value.get<double>();
  }
  if (!has_intercept) throw Error(ErrorCode::SchemaMismatch, "the intercept key must be \"beta_0\"", true);
  return record;
}

nlohmann::json beta_map_to_json(const LinearRecord& record) {
  nlohmann::json beta = nlohmann::json::object();
  beta["beta_0"] = record.beta0;
  for (const auto& [id, b] : record.betas) beta[id.str()] = b;
  return beta;
}

nlohmann::json record_to_json(const SynthesisRecord& record) {
  nlohmann::json doc;
  doc["rule"] = std::string(to_string(rule_of(record)));
  doc["key_factor"] = key_factor_of(record);
  if (auto* lin = std::get_if<LinearRecord>(&record)) {
    doc["beta"] = beta_map_to_json(*lin);
  } else if (auto* nor = std::get_if<NoisyOrRecord>(&record)) {
    doc["beta"] = beta_map_to_json(nor->coefficients);
  } else if (auto* logic = std::get_if<LogicRecord>(&record)) {
    doc["formula"] = to_string(logic->formula);
    doc["assumption"] = {{"detail", logic->assumption_detail}, {"probability", logic->assumption_probability}};
  }
  return doc;
}

namespace {

std::string optional_string(const nlohmann::json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(ErrorCode::SchemaMismatch, std::string("\"") + key + "\" must be a string", true);
  return it->get<std::string>();
}

}  // namespace

SynthesisRecord record_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("rule") || !doc["rule"].is_string())
    throw Error(ErrorCode::SchemaMismatch, "synthesis record needs a string \"rule\"");
  RuleKind rule = rule_from_string(doc["rule"].get<std::string>());
  std::string key_factor = optional_string(doc, "key_factor");
  switch (rule) {
    case RuleKind::Vanilla:
      return VanillaRecord{key_factor};
    case RuleKind::Average:
      return AverageRecord{key_factor};
    case RuleKind::Linear:
      if (!doc.contains("beta")) throw Error(ErrorCode::SchemaMismatch, "linear record needs \"beta\"", true);
      return linear_from_beta_map(doc["beta"], key_factor);
    case RuleKind::NoisyOr:
      if (!doc.contains("beta")) throw Error(ErrorCode::SchemaMismatch, "noisy-or record needs \"beta\"", true);
      return NoisyOrRecord{linear_from_beta_map(doc["beta"], key_factor)};
    case RuleKind::SimpleLogic: {
      if (!doc.contains("formula") || !doc["formula"].is_string())
        throw Error(ErrorCode::SchemaMismatch, "simple-logic record needs a string \"formula\"", true);
      LogicRecord logic;
      logic.formula = parse_formula(doc["formula"].get<std::string>());
      logic.key_factor = key_factor;
      auto it = doc.find("assumption");
      if (it != doc.end() && !it->is_null()) {
        if (!it->is_object()) throw Error(ErrorCode::SchemaMismatch, "\"assumption\" must be an object", true);
        logic.assumption_detail = optional_string(*it, "detail");
        auto p = it->find("probability");
        if (p == it->end() || !p->is_number())
          throw Error(ErrorCode::SchemaMismatch, "assumption needs a numeric \"probability\"", true);
        logic.assumption_probability = p->get<double>();
      }
      return logic;
    }
  }
  throw Error(ErrorCode::SchemaMismatch, "unhandled rule");
}

}  // namespace spr
