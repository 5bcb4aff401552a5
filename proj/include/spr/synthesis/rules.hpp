#pragma once

#include <map>
#include <set>
#include <span>

#include "spr/error.hpp"
#include "spr/synthesis/record.hpp"

namespace spr {

// beta0 + sum_j beta_j * v_j. Requires |beta_j| < 1, |beta0| <= intercept_bound
// and an exact key match; an out-of-range result is a retryable
// CoefficientError rather than being clamped.
double linear_apply(const LinearRecord& record, const ChildValues& child_values,
                    double intercept_bound = kDefaultInterceptBound);

// Unweighted mean. Throws Error(InvalidInput) when empty.
double average_apply(std::span<const double> values);
double average_apply(const ChildValues& child_values);

// 1 - (1 - beta0) * prod_j (1 - beta_j * v_j), all coefficients in [0,1].
double noisy_or_apply(const LinearRecord& record, const ChildValues& child_values);

// Evaluates the formula with children bound to their values and PA bound to
// the assumption probability.
double logic_apply(const LogicRecord& record, const ChildValues& child_values);

ValidationReport validate_logic(const LogicRecord& record, const std::set<NodeId>& child_ids);

// Dispatch for every rule except Vanilla (which has no closed form).
double apply_rule(const SynthesisRecord& record, const ChildValues& child_values,
                  double intercept_bound = kDefaultInterceptBound);

// Analytic d(parent)/d(child_j) at `child_values`. Vanilla -> Unsupported.
std::map<NodeId, double> sensitivity(const SynthesisRecord& record, const ChildValues& child_values);

// sum_j (d f / d C_j)^2 * variance_j, independent inputs.
double propagate_noise_variance(const SynthesisRecord& record, const ChildValues& child_values,
                                const std::map<NodeId, double>& variances);

struct GridPoint {
  double c1, c2;
  double value;
  double d1, d2;  // |partial| wrt each input
};

// resolution x resolution lattice over [0,1]^2 (row-major in c1, then c2).
// Requires exactly two children; resolution 1 samples the centre only.
std::vector<GridPoint> sensitivity_grid(const SynthesisRecord& record, std::span<const NodeId> children,
                                        int resolution);

}  // namespace spr
