#include "spr/simlab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spr/error.hpp"

namespace spr {

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Normal: return "normal";
    case NoiseKind::Uncertain: return "uncertain";
    case NoiseKind::Reverse: return "reverse";
    case NoiseKind::Additive: return "additive";
  }
  return "normal";
}

NoiseKind noise_kind_from_string(std::string_view text) {
  if (text == "normal") return NoiseKind::Normal;
  if (text == "uncertain") return NoiseKind::Uncertain;
  if (text == "reverse") return NoiseKind::Reverse;
  if (text == "additive") return NoiseKind::Additive;
  throw Error(ErrorCode::InvalidSpec, "unknown noise kind '" + std::string(text) + "'");
}

void NoiseModel::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidSpec, "noise alpha must lie in [0,1]");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidSpec, "noise sigma must be non-negative");
  if (!std::isfinite(bias)) throw Error(ErrorCode::InvalidSpec, "noise bias must be finite");
}

nlohmann::json NoiseModel::to_json() const {
  return {{"kind", std::string(to_string(kind))}, {"alpha", alpha}, {"sigma", sigma}, {"bias", bias}};
}

NoiseModel NoiseModel::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidSpec, "noise must be an object");
  NoiseModel m;
  try {
    m.kind = noise_kind_from_string(doc.value("kind", std::string("normal")));
    m.alpha = doc.value("alpha", 0.0);
    m.sigma = doc.value("sigma", 0.0);
    m.bias = doc.value("bias", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("noise: ") + e.what());
  }
  m.validate();
  return m;
}

double apply_noise(double p, const NoiseModel& model, RandomStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidInput, "apply_noise: p must lie in [0,1]");
  switch (model.kind) {
    case NoiseKind::Normal:
      return std::min(1.0, p + model.alpha * rng.uniform());
    case NoiseKind::Uncertain: {
      double u = rng.uniform();
      double replacement = rng.uniform();
      return u < model.alpha ? replacement : p;
    }
    case NoiseKind::Reverse:
      return rng.uniform() < model.alpha ? 1.0 - p : p;
    case NoiseKind::Additive: {
      // U(-a, a) has variance a^2 / 3.
      double half_width = model.sigma * std::sqrt(3.0);
      return std::clamp(p + model.bias + rng.uniform(-half_width, half_width), 0.0, 1.0);
    }
  }
  return p;
}

}  // namespace spr
