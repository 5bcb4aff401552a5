#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/agents/agent.hpp"
#include "spr/core/tree.hpp"
#include "spr/synthesis/record.hpp"

namespace spr {

enum class WeightScheme { Equal, Dirichlet, Fixed };
std::string_view to_string(WeightScheme scheme);
WeightScheme weight_scheme_from_string(std::string_view text);

// Balanced tree of the given depth and branching. Every internal node gets a
// LinearRecord: equal (beta_j = 1/K, beta0 = 0), dirichlet (Dirichlet(1..1)
// scaled by dirichlet_mass, beta0 = 0) or fixed (the same K weights and
// intercept at every node). Leaf ground truths are uniform on leaf_range or
// the fixed list in id order.
struct SyntheticTreeSpec {
  int depth = 1;
  int branching = 4;
  WeightScheme weights = WeightScheme::Equal;
  std::vector<double> fixed_weights;
  double intercept = 0.0;
  double dirichlet_mass = 1.0;
  std::optional<std::vector<double>> leaf_values;
  double leaf_low = 0.0;
  double leaf_high = 1.0;
  std::uint64_t seed = 0;

  std::size_t leaf_count() const;
  // Throws Error(InvalidSpec).
  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticTreeSpec from_json(const nlohmann::json& doc);
};

struct SyntheticTree {
  PropositionTree tree;  // leaves grounded at their truth, internal nodes synthesized
  std::map<NodeId, double> leaf_truth;
  double root_truth = 0.0;
};

// Throws Error(InvalidSpec) for bad weight or leaf list lengths and when the
// composed root falls outside [0,1].
SyntheticTree generate_synthetic_tree(const SyntheticTreeSpec& spec);

// Rules compared by the sweeps. The logic variants chain every child with
// AND (product) or OR; noisy_or reuses the linear coefficients.
enum class SimRule { Linear, Average, NoisyOr, LogicAnd, LogicOr };
std::string_view to_string(SimRule rule);
SimRule sim_rule_from_string(std::string_view text);

// The record a synthesizer following `rule` would emit for `children`.
SynthesisRecord sim_record(SimRule rule, const LinearRecord& linear, const std::vector<NodeId>& children);

// Bottom-up evaluation of `tree` with the rule's records. Linear results
// outside [0,1] are clamped, as the orchestrator does after exhausted retries.
class RuleEvaluator {
 public:
  RuleEvaluator(const PropositionTree& tree, SimRule rule);
  const std::vector<NodeId>& leaf_order() const noexcept { return leaves_; }
  // `leaf_values` follows leaf_order().
  double evaluate(const std::vector<double>& leaf_values) const;

 private:
  struct Step {
    std::size_t slot;
    std::vector<std::pair<NodeId, std::size_t>> inputs;
    SynthesisRecord record;
  };
  std::vector<NodeId> leaves_;
  std::vector<Step> steps_;  // children before parents
  std::size_t slots_ = 0;
  std::size_t root_slot_ = 0;
};

// Agents for scripted-free benchmarks. The analyzer expands P0 into K
// children at step 1 and stops; the grounder reports a fixed value; the
// synthesizer returns equal linear weights. Each call sleeps `latency`.
struct SyntheticAgentOptions {
  int branching = 3;
  double leaf_p_true = 0.7;
  std::chrono::microseconds analyzer_latency{0};
  std::chrono::microseconds grounder_latency{0};
  std::chrono::microseconds synthesizer_latency{0};
};

std::unique_ptr<Agent> synthetic_analyzer(const SyntheticAgentOptions& options);
std::unique_ptr<Agent> synthetic_grounder(const SyntheticAgentOptions& options);
std::unique_ptr<Agent> synthetic_synthesizer(const SyntheticAgentOptions& options);

}  // namespace spr
