#include "spr/synthesis/beta_path.hpp"

#include <cmath>

namespace spr {
namespace {

void accumulate(const PropositionTree& tree, const NodeId& id, double path_weight, BetaPathSummary& out) {
  const PropositionNode& n = tree.node(id);
  if (n.is_leaf()) {
    out.leaf_weights[id] += path_weight;
    return;
  }
  const LinearRecord* record = n.synthesis ? std::get_if<LinearRecord>(&*n.synthesis) : nullptr;
  if (!record) throw Error(ErrorCode::MixedRules, "internal node " + id.str() + " has no linear record");
  out.aggregated_intercept += path_weight * record->beta0;
  for (const auto& child : n.children) {
    auto it = record->betas.find(child);
    if (it == record->betas.end())
      throw Error(ErrorCode::SchemaMismatch, "record of " + id.str() + " has no beta for " + child.str());
    accumulate(tree, child, path_weight * it->second, out);
  }
}

void require_keys(const BetaPathSummary& s, const std::map<NodeId, double>& m, const char* what) {
  if (m.size() != s.leaf_weights.size())
    throw Error(ErrorCode::SchemaMismatch, std::string(what) + " must cover exactly the leaves");
  for (const auto& [id, w] : s.leaf_weights)
    if (!m.count(id)) throw Error(ErrorCode::SchemaMismatch, std::string(what) + " lacks leaf " + id.str());
}

}  // namespace

BetaPathSummary compute_beta_paths(const PropositionTree& tree) {
  BetaPathSummary out;
  accumulate(tree, tree.root(), 1.0, out);
  return out;
}

double evaluate_flat(const BetaPathSummary& summary, const std::map<NodeId, double>& leaf_values) {
  require_keys(summary, leaf_values, "leaf values");
  double v = summary.aggregated_intercept;
  for (const auto& [id, w] : summary.leaf_weights) v += w * leaf_values.at(id);
  return v;
}

double propagate_bias(const BetaPathSummary& summary, const std::map<NodeId, double>& leaf_biases) {
  require_keys(summary, leaf_biases, "leaf biases");
  double b = 0.0;
  for (const auto& [id, w] : summary.leaf_weights) b += w * leaf_biases.at(id);
  return b;
}

LeafCovariance LeafCovariance::diagonal(const std::map<NodeId, double>& variances) {
  LeafCovariance c;
  for (const auto& [id, v] : variances) c.ids.push_back(id);
  c.values.assign(c.ids.size() * c.ids.size(), 0.0);
  for (std::size_t i = 0; i < c.ids.size(); ++i) c.values[i * c.ids.size() + i] = variances.at(c.ids[i]);
  return c;
}

double propagate_variance(const BetaPathSummary& summary, const LeafCovariance& covariance) {
  const std::size_t n = covariance.ids.size();
  if (covariance.values.size() != n * n) throw Error(ErrorCode::InvalidInput, "covariance must be square");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double a = covariance.at(i, j), b = covariance.at(j, i);
      if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}))
        throw Error(ErrorCode::InvalidInput, "covariance matrix is not symmetric");
    }
  std::map<NodeId, double> index_check;
  for (const auto& id : covariance.ids) index_check[id] = 0.0;
  require_keys(summary, index_check, "covariance");

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = summary.leaf_weights.at(covariance.ids[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += w[i] * w[j] * covariance.at(i, j);
  return total;
}

double propagate_variance(const BetaPathSummary& summary, const std::map<NodeId, double>& variances) {
  return propagate_variance(summary, LeafCovariance::diagonal(variances));
}

}  // namespace spr
