#include "spr/synthesis/bayes_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spr/error.hpp"

namespace spr {

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::MinMax: return "minmax";
    case Normalization::Softmax: return "softmax";
  }
  return "none";
}

Normalization normalization_from_string(std::string_view text) {
  if (text == "none") return Normalization::None;
  if (text == "minmax") return Normalization::MinMax;
  if (text == "softmax") return Normalization::Softmax;
  throw Error(ErrorCode::InvalidInput, "unknown normalization '" + std::string(text) + "'");
}

std::string BayesNetExport::assignment_label(std::size_t mask) const {
  std::string label(children.size(), '0');
  for (std::size_t j = 0; j < children.size(); ++j)
    if (mask & (std::size_t{1} << j)) label[j] = '1';
  return label;
}

namespace {

constexpr double kSlack = 1e-12;

void fill_priors(BayesNetExport& net, const LinearRecord& record, const ChildValues& child_priors) {
  if (record.betas.size() != child_priors.size())
    throw Error(ErrorCode::SchemaMismatch, "priors must cover exactly the record's children");
  if (record.betas.size() > kMaxEnumeratedChildren)
    throw Error(ErrorCode::TooLarge, "more than 20 children cannot be enumerated");
  for (const auto& [id, b] : record.betas) {
    auto it = child_priors.find(id);
    if (it == child_priors.end()) throw Error(ErrorCode::SchemaMismatch, "no prior for child " + id.str());
    if (!(it->second >= 0.0 && it->second <= 1.0))
      throw Error(ErrorCode::InvalidInput, "prior of " + id.str() + " outside [0,1]");
    net.children.push_back(id);
    net.priors.push_back(it->second);
    net.betas.push_back(b);
  }
}

bool within_constraints(double beta0, const std::vector<double>& betas) {
  if (beta0 < -kSlack) return false;
  double sum = beta0;
  for (double b : betas) {
    if (b < -kSlack || b > 1.0 + kSlack) return false;
    sum += b;
  }
  return sum <= 1.0 + kSlack;
}

// Shift so every weight (intercept included) is non-negative, then divide by
// the total.
void minmax_normalize(double& beta0, std::vector<double>& betas) {
  double lo = std::min(beta0, betas.empty() ? beta0 : *std::min_element(betas.begin(), betas.end()));
  double shift = lo < 0.0 ? -lo : 0.0;
  beta0 += shift;
  for (double& b : betas) b += shift;
  double total = std::accumulate(betas.begin(), betas.end(), beta0);
  if (total <= 0.0) return;
  beta0 /= total;
  for (double& b : betas) b /= total;
}

// Softmax over (beta0, beta_1..beta_k, 0); the trailing slot is the implicit
// "no cause active" weight and is dropped, so the kept weights sum below 1.
void softmax_normalize(double& beta0, std::vector<double>& betas) {
  double hi = std::max(0.0, std::max(beta0, betas.empty() ? beta0 : *std::max_element(betas.begin(), betas.end())));
  double z = std::exp(-hi) + std::exp(beta0 - hi);
  for (double b : betas) z += std::exp(b - hi);
  beta0 = std::exp(beta0 - hi) / z;
  for (double& b : betas) b = std::exp(b - hi) / z;
}

}  // namespace

BayesNetExport to_bayes_net(const LinearRecord& record, const ChildValues& child_priors, Normalization normalization) {
  BayesNetExport net;
  fill_priors(net, record, child_priors);
  net.beta0 = record.beta0;
  if (!within_constraints(net.beta0, net.betas)) {
    switch (normalization) {
      case Normalization::None:
        throw Error(ErrorCode::ConstraintViolation,
                    "coefficients need beta_j in [0,1] and beta_0 + sum beta_j <= 1 for a CPD reading");
      case Normalization::MinMax:
        minmax_normalize(net.beta0, net.betas);
        break;
      case Normalization::Softmax:
        softmax_normalize(net.beta0, net.betas);
        break;
    }
    net.normalization_applied = true;
    net.method = normalization;
  }
  const std::size_t k = net.children.size();
  net.cpd.resize(std::size_t{1} << k);
  for (std::size_t mask = 0; mask < net.cpd.size(); ++mask) {
    double p = net.beta0;
    for (std::size_t j = 0; j < k; ++j)
      if (mask & (std::size_t{1} << j)) p += net.betas[j];
    net.cpd[mask] = std::clamp(p, 0.0, 1.0);
  }
  return net;
}

BayesNetExport to_noisy_or_bayes_net(const LinearRecord& record, const ChildValues& child_priors) {
  BayesNetExport net;
  fill_priors(net, record, child_priors);
  net.beta0 = record.beta0;
  if (!(net.beta0 >= 0.0 && net.beta0 <= 1.0))
    throw Error(ErrorCode::CoefficientError, "noisy-or leak must lie in [0,1]");
  for (double b : net.betas)
    if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorCode::CoefficientError, "noisy-or strengths must lie in [0,1]");
  const std::size_t k = net.children.size();
  net.cpd.resize(std::size_t{1} << k);
  for (std::size_t mask = 0; mask < net.cpd.size(); ++mask) {
    double none_fire = 1.0 - net.beta0;
    for (std::size_t j = 0; j < k; ++j)
      if (mask & (std::size_t{1} << j)) none_fire *= 1.0 - net.betas[j];
    net.cpd[mask] = 1.0 - none_fire;
  }
  return net;
}

double wmc_probability(const BayesNetExport& net) {
  const std::size_t k = net.children.size();
  if (k > kMaxEnumeratedChildren) throw Error(ErrorCode::TooLarge, "more than 20 children cannot be enumerated");
  if (net.cpd.size() != (std::size_t{1} << k) || net.priors.size() != k)
    throw Error(ErrorCode::SchemaMismatch, "CPD size does not match the child count");
  double total = 0.0;
  for (std::size_t mask = 0; mask < net.cpd.size(); ++mask) {
    double weight = 1.0;
    for (std::size_t j = 0; j < k; ++j)
      weight *= (mask & (std::size_t{1} << j)) ? net.priors[j] : 1.0 - net.priors[j];
    total += weight * net.cpd[mask];
  }
  return total;
}

nlohmann::json bayes_net_to_json(const BayesNetExport& net) {
  nlohmann::json children = nlohmann::json::array();
  nlohmann::json priors = nlohmann::json::object();
  nlohmann::json betas = nlohmann::json::object();
  for (std::size_t j = 0; j < net.children.size(); ++j) {
    children.push_back(net.children[j].str());
    priors[net.children[j].str()] = net.priors[j];
    betas[net.children[j].str()] = net.betas[j];
  }
  nlohmann::json cpd = nlohmann::json::object();
  for (std::size_t mask = 0; mask < net.cpd.size(); ++mask) cpd[net.assignment_label(mask)] = net.cpd[mask];
  return {
      {"children", children},
      {"priors", priors},
      {"beta_0", net.beta0},
      {"betas", betas},
      {"cpd", cpd},
      {"normalization_applied", net.normalization_applied},
      {"normalization", std::string(to_string(net.method))},
      {"probability", wmc_probability(net)},
  };
}

}  // namespace spr
