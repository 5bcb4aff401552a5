#pragma once

#include <map>
#include <vector>

#include "spr/core/tree.hpp"

namespace spr {

// Flattened form of an all-linear tree: root = intercept + sum_i w_i * leaf_i,
// where w_i is the product of local betas on the root-to-leaf path.
struct BetaPathSummary {
  double aggregated_intercept = 0.0;
  std::map<NodeId, double> leaf_weights;
};

// Throws Error(MixedRules) when an internal node lacks a LinearRecord.
BetaPathSummary compute_beta_paths(const PropositionTree& tree);

// Throws Error(SchemaMismatch) on key mismatch.
double evaluate_flat(const BetaPathSummary& summary, const std::map<NodeId, double>& leaf_values);

// sum_i w_i * bias_i.
double propagate_bias(const BetaPathSummary& summary, const std::map<NodeId, double>& leaf_biases);

// Dense symmetric covariance over leaf ids (row-major).
struct LeafCovariance {
  std::vector<NodeId> ids;
  std::vector<double> values;

  static LeafCovariance diagonal(const std::map<NodeId, double>& variances);
  double at(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
};

// sum_i w_i^2 Var_i + sum_{i != j} w_i w_j Cov_ij. Asymmetric input -> InvalidInput.
double propagate_variance(const BetaPathSummary& summary, const LeafCovariance& covariance);
// Independent leaves (zero off-diagonals).
double propagate_variance(const BetaPathSummary& summary, const std::map<NodeId, double>& variances);

}  // namespace spr
