#include "spr/synthesis/rules.hpp"

#include <cmath>
#include <numeric>

namespace spr {
namespace {

// Tolerance for results that overshoot [0,1] only by rounding.
constexpr double kRangeSlack = 1e-12;

void require_probability(double v, const std::string& what) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidInput, what + " must lie in [0,1]");
}

void require_same_keys(const std::map<NodeId, double>& betas, const ChildValues& values) {
  for (const auto& [id, v] : values)
    if (!betas.count(id)) throw Error(ErrorCode::SchemaMismatch, "no coefficient for child " + id.str(), true);
  for (const auto& [id, b] : betas)
    if (!values.count(id)) throw Error(ErrorCode::SchemaMismatch, "coefficient for unknown child " + id.str(), true);
}

double clamp_slack(double v) {
  if (v < 0.0 && v >= -kRangeSlack) return 0.0;
  if (v > 1.0 && v <= 1.0 + kRangeSlack) return 1.0;
  return v;
}

Assignment logic_assignment(const LogicRecord& record, const ChildValues& child_values) {
  Assignment a;
  for (const auto& [id, v] : child_values) a[id.str()] = v;
  a[std::string(kAssumptionVariable)] = record.assumption_probability;
  return a;
}

}  // namespace

double linear_apply(const LinearRecord& record, const ChildValues& child_values, double intercept_bound) {
  require_same_keys(record.betas, child_values);
  if (std::abs(record.beta0) > intercept_bound)
    throw Error(ErrorCode::CoefficientError,
                "|beta_0| = " + std::to_string(std::abs(record.beta0)) + " exceeds " + std::to_string(intercept_bound),
                true);
  double sum = record.beta0;
  for (const auto& [id, v] : child_values) {
    require_probability(v, "child value " + id.str());
    double b = record.betas.at(id);
    if (!(std::abs(b) < 1.0))
      throw Error(ErrorCode::CoefficientError, "|beta| for " + id.str() + " must be below 1", true);
    sum += b * v;
  }
  sum = clamp_slack(sum);
  if (!(sum >= 0.0 && sum <= 1.0))
    throw Error(ErrorCode::CoefficientError, "linear result " + std::to_string(sum) + " lies outside [0,1]", true);
  return sum;
}

double average_apply(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidInput, "average of no children");
  for (double v : values) require_probability(v, "child value");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double average_apply(const ChildValues& child_values) {
  std::vector<double> v;
  for (const auto& [id, x] : child_values) v.push_back(x);
  return average_apply(v);
}

double noisy_or_apply(const LinearRecord& record, const ChildValues& child_values) {
  require_same_keys(record.betas, child_values);
  if (!(record.beta0 >= 0.0 && record.beta0 <= 1.0))
    throw Error(ErrorCode::CoefficientError, "noisy-or leak must lie in [0,1]", true);
  double none_fire = 1.0 - record.beta0;
  for (const auto& [id, v] : child_values) {
    require_probability(v, "child value " + id.str());
    double b = record.betas.at(id);
    if (!(b >= 0.0 && b <= 1.0))
      throw Error(ErrorCode::CoefficientError, "noisy-or strength for " + id.str() + " must lie in [0,1]", true);
    none_fire *= 1.0 - b * v;
  }
  return 1.0 - none_fire;
}

double logic_apply(const LogicRecord& record, const ChildValues& child_values) {
  require_probability(record.assumption_probability, "assumption probability");
  for (const auto& [id, v] : child_values) require_probability(v, "child value " + id.str());
  return clamp_slack(eval_formula(record.formula, logic_assignment(record, child_values)));
}

ValidationReport validate_logic(const LogicRecord& record, const std::set<NodeId>& child_ids) {
  ValidationReport report;
  auto vars = formula_variables(record.formula);
  for (const auto& id : child_ids)
    if (!vars.count(id.str())) report.push_back({"MissingChild", id.str(), "formula does not use " + id.str()});
  for (const auto& v : vars) {
    if (v == kAssumptionVariable) continue;
    if (!NodeId::is_valid(v) || !child_ids.count(NodeId::parse(v)))
      report.push_back({"UnknownVariable", v, "formula references " + v + ", which is not a child"});
  }
  if (!(record.assumption_probability >= 0.0 && record.assumption_probability <= 1.0))
    report.push_back({"AssumptionRange", std::nullopt, "assumption probability outside [0,1]"});
  return report;
}

double apply_rule(const SynthesisRecord& record, const ChildValues& child_values, double intercept_bound) {
  switch (rule_of(record)) {
    case RuleKind::Linear:
      return linear_apply(std::get<LinearRecord>(record), child_values, intercept_bound);
    case RuleKind::NoisyOr:
      return noisy_or_apply(std::get<NoisyOrRecord>(record).coefficients, child_values);
    case RuleKind::SimpleLogic:
      return logic_apply(std::get<LogicRecord>(record), child_values);
    case RuleKind::Average:
      return average_apply(child_values);
    case RuleKind::Vanilla:
      break;
  }
  throw Error(ErrorCode::Unsupported, "vanilla synthesis has no closed form");
}

std::map<NodeId, double> sensitivity(const SynthesisRecord& record, const ChildValues& child_values) {
  std::map<NodeId, double> out;
  switch (rule_of(record)) {
    case RuleKind::Linear: {
      const auto& lin = std::get<LinearRecord>(record);
      require_same_keys(lin.betas, child_values);
      return lin.betas;
    }
    case RuleKind::NoisyOr: {
      const auto& lin = std::get<NoisyOrRecord>(record).coefficients;
      require_same_keys(lin.betas, child_values);
      for (const auto& [j, bj] : lin.betas) {
        double others = 1.0 - lin.beta0;
        for (const auto& [i, bi] : lin.betas)
          if (i != j) others *= 1.0 - bi * child_values.at(i);
        out[j] = bj * others;
      }
      return out;
    }
    case RuleKind::SimpleLogic: {
      const auto& logic = std::get<LogicRecord>(record);
      Assignment a = logic_assignment(logic, child_values);
      for (const auto& [id, v] : child_values) out[id] = formula_partial(logic.formula, a, id.str());
      return out;
    }
    case RuleKind::Average: {
      if (child_values.empty()) throw Error(ErrorCode::InvalidInput, "average of no children");
      for (const auto& [id, v] : child_values) out[id] = 1.0 / static_cast<double>(child_values.size());
      return out;
    }
    case RuleKind::Vanilla:
      break;
  }
  throw Error(ErrorCode::Unsupported, "vanilla synthesis has no closed-form sensitivity");
}

double propagate_noise_variance(const SynthesisRecord& record, const ChildValues& child_values,
                                const std::map<NodeId, double>& variances) {
  auto partials = sensitivity(record, child_values);
  double total = 0.0;
  for (const auto& [id, d] : partials) {
    auto it = variances.find(id);
    if (it == variances.end()) continue;
    if (it->second < 0.0) throw Error(ErrorCode::InvalidInput, "negative variance for " + id.str());
    total += d * d * it->second;
  }
  return total;
}

std::vector<GridPoint> sensitivity_grid(const SynthesisRecord& record, std::span<const NodeId> children,
                                        int resolution) {
  if (resolution <= 0) throw Error(ErrorCode::InvalidInput, "grid resolution must be positive");
  if (children.size() != 2) throw Error(ErrorCode::Unsupported, "sensitivity grids need exactly two children");
  auto coord = [&](int i) { return resolution == 1 ? 0.5 : static_cast<double>(i) / (resolution - 1); };
  std::vector<GridPoint> grid;
  grid.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      ChildValues v{{children[0], coord(i)}, {children[1], coord(j)}};
      auto s = sensitivity(record, v);
      // The linear range check does not apply to plotting lattices.
      double value = rule_of(record) == RuleKind::Linear
                         ? std::get<LinearRecord>(record).beta0 +
                               std::get<LinearRecord>(record).betas.at(children[0]) * coord(i) +
                               std::get<LinearRecord>(record).betas.at(children[1]) * coord(j)
                         : apply_rule(record, v);
      grid.push_back({coord(i), coord(j), value, std::abs(s.at(children[0])), std::abs(s.at(children[1]))});
    }
  }
  return grid;
}

}  // namespace spr
