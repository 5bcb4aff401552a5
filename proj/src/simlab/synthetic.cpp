#include "spr/simlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <thread>

#include "spr/agents/scripted.hpp"
#include "spr/error.hpp"
#include "spr/simlab/random.hpp"
#include "spr/synthesis/beta_path.hpp"
#include "spr/synthesis/rules.hpp"

namespace spr {

namespace {

constexpr std::uint64_t kLeafStream = kStructureStream - 1;

NodeId child_of(const NodeId& parent, int j) {
  return NodeId::parse(parent.is_root() ? "P" + std::to_string(j) : parent.str() + "." + std::to_string(j));
}

LinearRecord node_record(const SyntheticTreeSpec& spec, const std::vector<NodeId>& children, RandomStream& rng) {
  LinearRecord r;
  const auto k = children.size();
  switch (spec.weights) {
    case WeightScheme::Equal:
      for (const auto& c : children) r.betas[c] = 1.0 / static_cast<double>(k);
      break;
    case WeightScheme::Dirichlet: {
      std::vector<double> g(k);
      double sum = 0.0;
      for (auto& x : g) sum += (x = rng.exponential());
      for (std::size_t j = 0; j < k; ++j) r.betas[children[j]] = spec.dirichlet_mass * g[j] / sum;
      break;
    }
    case WeightScheme::Fixed:
      r.beta0 = spec.intercept;
      for (std::size_t j = 0; j < k; ++j) r.betas[children[j]] = spec.fixed_weights[j];
      break;
  }
  r.key_factor = "synthetic weights";
  return r;
}

Formula chain(const std::vector<NodeId>& children, bool conjunction) {
  Formula f = Formula::var(children.front().str());
  for (std::size_t j = 1; j < children.size(); ++j) {
    Formula next = Formula::var(children[j].str());
    f = conjunction ? Formula::conj(std::move(f), std::move(next)) : Formula::disj(std::move(f), std::move(next));
  }
  return f;
}

double sleep_then(std::chrono::microseconds latency) {
  if (latency.count() > 0) std::this_thread::sleep_for(latency);
  return 0.0;
}

}  // namespace

std::string_view to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::Equal: return "equal";
    case WeightScheme::Dirichlet: return "dirichlet";
    case WeightScheme::Fixed: return "fixed";
  }
  return "equal";
}

WeightScheme weight_scheme_from_string(std::string_view text) {
  if (text == "equal") return WeightScheme::Equal;
  if (text == "dirichlet") return WeightScheme::Dirichlet;
  if (text == "fixed") return WeightScheme::Fixed;
  throw Error(ErrorCode::InvalidSpec, "unknown weight scheme '" + std::string(text) + "'");
}

std::size_t SyntheticTreeSpec::leaf_count() const {
  std::size_t n = 1;
  for (int d = 0; d < depth; ++d) n *= static_cast<std::size_t>(branching);
  return n;
}

void SyntheticTreeSpec::validate() const {
  if (depth < 0 || depth > 12) throw Error(ErrorCode::InvalidSpec, "depth must lie in [0,12]");
  if (depth > 0 && branching < 2) throw Error(ErrorCode::InvalidSpec, "branching must be at least 2");
  if (leaf_count() > 1'000'000) throw Error(ErrorCode::InvalidSpec, "synthetic tree too large");
  if (weights == WeightScheme::Fixed) {
    if (fixed_weights.size() != static_cast<std::size_t>(branching))
      throw Error(ErrorCode::InvalidSpec, "fixed weights need exactly " + std::to_string(branching) + " entries");
    for (double b : fixed_weights)
      if (!(std::fabs(b) < 1.0)) throw Error(ErrorCode::InvalidSpec, "fixed weights must satisfy |beta| < 1");
    if (!(std::fabs(intercept) <= kDefaultInterceptBound))
      throw Error(ErrorCode::InvalidSpec, "intercept exceeds the bound");
  }
  if (weights == WeightScheme::Dirichlet && !(dirichlet_mass > 0.0 && dirichlet_mass <= 1.0))
    throw Error(ErrorCode::InvalidSpec, "dirichlet_mass must lie in (0,1]");
  if (leaf_values) {
    if (leaf_values->size() != leaf_count())
      throw Error(ErrorCode::InvalidSpec, "leaf_values needs exactly " + std::to_string(leaf_count()) + " entries");
    for (double v : *leaf_values)
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidSpec, "leaf values must lie in [0,1]");
  } else if (!(leaf_low >= 0.0 && leaf_low <= leaf_high && leaf_high <= 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "leaf range must satisfy 0 <= low <= high <= 1");
  }
}

nlohmann::json SyntheticTreeSpec::to_json() const {
  nlohmann::json doc{{"depth", depth},
                     {"branching", branching},
                     {"weights", std::string(to_string(weights))},
                     {"seed", seed}};
  if (weights == WeightScheme::Fixed) {
    doc["fixed_weights"] = fixed_weights;
    doc["intercept"] = intercept;
  }
  if (weights == WeightScheme::Dirichlet) doc["dirichlet_mass"] = dirichlet_mass;
  if (leaf_values)
    doc["leaf_values"] = *leaf_values;
  else
    doc["leaf_range"] = {leaf_low, leaf_high};
  return doc;
}

SyntheticTreeSpec SyntheticTreeSpec::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidSpec, "synthetic spec must be an object");
  static const std::set<std::string> known{"depth",     "branching",      "weights",     "fixed_weights", "intercept",
                                           "seed",      "dirichlet_mass", "leaf_values", "leaf_range"};
  for (const auto& [k, _] : doc.items())
    if (!known.count(k)) throw Error(ErrorCode::InvalidSpec, "unknown synthetic key '" + k + "'");
  SyntheticTreeSpec s;
  try {
    s.depth = doc.value("depth", s.depth);
    s.branching = doc.value("branching", s.branching);
    s.weights = weight_scheme_from_string(doc.value("weights", std::string("equal")));
    s.fixed_weights = doc.value("fixed_weights", std::vector<double>{});
    s.intercept = doc.value("intercept", 0.0);
    s.dirichlet_mass = doc.value("dirichlet_mass", 1.0);
    s.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("leaf_values")) s.leaf_values = doc.at("leaf_values").get<std::vector<double>>();
    if (doc.contains("leaf_range")) {
      auto range = doc.at("leaf_range").get<std::vector<double>>();
      if (range.size() != 2) throw Error(ErrorCode::InvalidSpec, "leaf_range needs two entries");
      s.leaf_low = range[0];
      s.leaf_high = range[1];
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticTree generate_synthetic_tree(const SyntheticTreeSpec& spec) {
  spec.validate();
  PropositionTree tree = create_tree("Synthetic proposition P0.", "1970-01-01T00:00:00Z");
  RandomStream weight_rng(spec.seed, kStructureStream);
  std::map<NodeId, LinearRecord> records;

  std::vector<NodeId> level{tree.root()};
  for (int d = 0; d < spec.depth; ++d) {
    std::vector<NodeId> next;
    for (const auto& parent : level) {
      ChildStatements kids;
      std::vector<NodeId> ids;
      for (int j = 1; j <= spec.branching; ++j) {
        ids.push_back(child_of(parent, j));
        kids.emplace_back(ids.back().str(), "Synthetic proposition " + ids.back().str() + ".");
      }
      tree = add_children(tree, parent, kids, "synthetic");
      records[parent] = node_record(spec, ids, weight_rng);
      next.insert(next.end(), ids.begin(), ids.end());
    }
    level = std::move(next);
  }

  SyntheticTree out{tree, {}, 0.0};
  RandomStream leaf_rng(spec.seed, kLeafStream);
  auto ls = leaves(out.tree);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    double v = spec.leaf_values ? (*spec.leaf_values)[i] : leaf_rng.uniform(spec.leaf_low, spec.leaf_high);
    out.leaf_truth[ls[i]] = v;
    out.tree.set_grounded(ls[i], v, "synthetic ground truth", "");
  }

  auto internal = internal_nodes(out.tree);
  std::stable_sort(internal.begin(), internal.end(), [&](const NodeId& a, const NodeId& b) {
    return out.tree.depth_of(a) > out.tree.depth_of(b);
  });
  for (const auto& id : internal) {
    ChildValues values;
    for (const auto& c : out.tree.node(id).children) values[c] = *out.tree.node(c).p_true;
    double v;
    try {
      v = linear_apply(records.at(id), values);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidSpec, "synthetic node " + id.str() + ": " + e.what());
    }
    out.tree.set_synthesized(id, v, "synthetic composition", records.at(id));
  }
  out.root_truth = spec.depth == 0 ? out.leaf_truth.begin()->second
                                   : evaluate_flat(compute_beta_paths(out.tree), out.leaf_truth);
  return out;
}

std::string_view to_string(SimRule rule) {
  switch (rule) {
    case SimRule::Linear: return "linear";
    case SimRule::Average: return "average";
    case SimRule::NoisyOr: return "noisy_or";
    case SimRule::LogicAnd: return "logic_and";
    case SimRule::LogicOr: return "logic_or";
  }
  return "linear";
}

SimRule sim_rule_from_string(std::string_view text) {
  for (SimRule r : {SimRule::Linear, SimRule::Average, SimRule::NoisyOr, SimRule::LogicAnd, SimRule::LogicOr})
    if (text == to_string(r)) return r;
  throw Error(ErrorCode::InvalidSpec, "unknown simulation rule '" + std::string(text) + "'");
}

SynthesisRecord sim_record(SimRule rule, const LinearRecord& linear, const std::vector<NodeId>& children) {
  switch (rule) {
    case SimRule::Linear: return linear;
    case SimRule::Average: return AverageRecord{};
    case SimRule::NoisyOr: return NoisyOrRecord{linear};
    case SimRule::LogicAnd: return LogicRecord{chain(children, true), "", 0.0, "all children"};
    case SimRule::LogicOr: return LogicRecord{chain(children, false), "", 0.0, "any child"};
  }
  return linear;
}

RuleEvaluator::RuleEvaluator(const PropositionTree& tree, SimRule rule) : leaves_(leaves(tree)) {
  std::map<NodeId, std::size_t> slot;
  for (const auto& l : leaves_) slot[l] = slots_++;
  auto internal = internal_nodes(tree);
  std::stable_sort(internal.begin(), internal.end(),
                   [&](const NodeId& a, const NodeId& b) { return tree.depth_of(a) > tree.depth_of(b); });
  for (const auto& id : internal) {
    const PropositionNode& n = tree.node(id);
    LinearRecord linear;
    if (n.synthesis && std::holds_alternative<LinearRecord>(*n.synthesis)) {
      linear = std::get<LinearRecord>(*n.synthesis);
    } else {
      for (const auto& c : n.children) linear.betas[c] = 1.0 / static_cast<double>(n.children.size());
    }
    Step step{slots_, {}, sim_record(rule, linear, n.children)};
    for (const auto& c : n.children) step.inputs.emplace_back(c, slot.at(c));
    slot[id] = slots_++;
    steps_.push_back(std::move(step));
  }
  root_slot_ = slot.at(tree.root());
}

double RuleEvaluator::evaluate(const std::vector<double>& leaf_values) const {
  if (leaf_values.size() != leaves_.size()) throw Error(ErrorCode::InvalidInput, "leaf value count mismatch");
  std::vector<double> v(slots_);
  std::copy(leaf_values.begin(), leaf_values.end(), v.begin());
  ChildValues values;
  for (const auto& step : steps_) {
    values.clear();
    for (const auto& [id, s] : step.inputs) values.emplace(id, v[s]);
    if (const auto* linear = std::get_if<LinearRecord>(&step.record)) {
      try {
        v[step.slot] = linear_apply(*linear, values);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::CoefficientError) throw;
        double raw = linear->beta0;
        for (const auto& [id, x] : values) raw += linear->betas.at(id) * x;
        v[step.slot] = std::clamp(raw, 0.0, 1.0);
      }
    } else {
      v[step.slot] = apply_rule(step.record, values);
    }
  }
  return v[root_slot_];
}

std::unique_ptr<Agent> synthetic_analyzer(const SyntheticAgentOptions& options) {
  return std::make_unique<FunctionAgent>([options](const AgentRequest& req) {
    sleep_then(options.analyzer_latency);
    if (req.step != 1) return fenced_response("No further expansion.", nlohmann::json::array());
    // Emission order matters and plain json sorts keys, so the payload is an ordered_json.
    nlohmann::ordered_json kids = nlohmann::ordered_json::object();
    for (int j = 1; j <= options.branching; ++j)
      kids["P" + std::to_string(j)] = "Factor " + std::to_string(j) + " of: " + req.statement;
    nlohmann::ordered_json payload = nlohmann::ordered_json::array();
    payload.push_back({{"parent", req.node_id}, {"children", kids}, {"causality", "synthetic split"}});
    return "Synthetic analysis.\n\n```json\n" + payload.dump(2) + "\n```\n";
  });
}

std::unique_ptr<Agent> synthetic_grounder(const SyntheticAgentOptions& options) {
  return std::make_unique<FunctionAgent>([options](const AgentRequest&) {
    sleep_then(options.grounder_latency);
    return fenced_response("Synthetic evidence.", {{"p_true", options.leaf_p_true}, {"key_factor", "synthetic"}});
  });
}

std::unique_ptr<Agent> synthetic_synthesizer(const SyntheticAgentOptions& options) {
  return std::make_unique<FunctionAgent>([options](const AgentRequest& req) {
    sleep_then(options.synthesizer_latency);
    nlohmann::json payload;
    for (const auto& m : req.messages)
      if (m.role == "user") payload = nlohmann::json::parse(m.content, nullptr, false);
    nlohmann::json beta{{"beta_0", 0.0}};
    if (payload.is_object() && payload.contains("children")) {
      const auto& kids = payload["children"];
      for (const auto& [id, _] : kids.items()) beta[id] = 1.0 / static_cast<double>(kids.size());
    }
    return fenced_response("Equal weights.", {{"beta", beta}, {"key_factor", "synthetic"}});
  });
}

}  // namespace spr
