#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/synthesis/record.hpp"

namespace spr {

enum class Normalization { None, MinMax, Softmax };

std::string_view to_string(Normalization n);
Normalization normalization_from_string(std::string_view text);

inline constexpr std::size_t kMaxEnumeratedChildren = 20;

// A parent node with k binary children. cpd[mask] is P(parent | assignment),
// where bit j of mask is the truth of children[j].
struct BayesNetExport {
  std::vector<NodeId> children;
  std::vector<double> priors;
  std::vector<double> cpd;
  double beta0 = 0.0;
  std::vector<double> betas;  // coefficients actually used (after normalization)
  bool normalization_applied = false;
  Normalization method = Normalization::None;

  // "10" = first child true, second false.
  std::string assignment_label(std::size_t mask) const;
};

// CPD entry = beta0 + sum_j beta_j * bit_j. Coefficients outside the
// beta in [0,1], beta0 + sum <= 1 region are normalized by `normalization`,
// or rejected with ConstraintViolation when it is None.
BayesNetExport to_bayes_net(const LinearRecord& record, const ChildValues& child_priors,
                            Normalization normalization = Normalization::None);

// CPD entry = 1 - (1 - beta0) * prod_{j active} (1 - beta_j): the unconstrained
// independent-cause reading.
BayesNetExport to_noisy_or_bayes_net(const LinearRecord& record, const ChildValues& child_priors);

// Exhaustive sum over the 2^k assignments. k > 20 -> TooLarge.
double wmc_probability(const BayesNetExport& net);

nlohmann::json bayes_net_to_json(const BayesNetExport& net);

}  // namespace spr
