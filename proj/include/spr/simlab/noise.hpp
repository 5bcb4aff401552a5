#pragma once

#include <string_view>

#include <nlohmann/json.hpp>

#include "spr/simlab/random.hpp"

namespace spr {

// normal:    p + U(0, alpha), clamped to [0,1]
// uncertain: U(0,1) with probability alpha, else p
// reverse:   1 - p with probability alpha, else p
// additive:  p + bias + zero-mean uniform noise with standard deviation sigma,
//            clamped to [0,1]; used for the variance and bias laws
enum class NoiseKind { Normal, Uncertain, Reverse, Additive };
std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view text);

struct NoiseModel {
  NoiseKind kind = NoiseKind::Normal;
  double alpha = 0.0;
  double sigma = 0.0;
  double bias = 0.0;

  // Throws Error(InvalidSpec) for alpha outside [0,1] or negative sigma.
  void validate() const;
  nlohmann::json to_json() const;
  static NoiseModel from_json(const nlohmann::json& doc);
};

// Throws Error(InvalidInput) when p is outside [0,1].
double apply_noise(double p, const NoiseModel& model, RandomStream& rng);

}  // namespace spr
