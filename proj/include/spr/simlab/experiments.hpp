#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spr/simlab/noise.hpp"
#include "spr/simlab/synthetic.hpp"
#include "spr/synthesis/rules.hpp"

namespace spr {

struct BiasVarianceReport {
  long runs = 0;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;  // mean - truth
  double bias_squared = 0.0;
  double variance = 0.0;  // population form, 1/R
  double mse = 0.0;       // (1/R) sum (x - truth)^2, computed directly
  double residual = 0.0;  // |mse - bias^2 - variance|
};

// Throws Error(InsufficientRuns) for fewer than two estimates.
BiasVarianceReport summarize_estimates(std::span<const double> estimates, double truth);

// R noisy grounding rounds of the spec's tree; leaf i of round r draws from
// stream (seed, stream_id(r, i)), so `workers` never changes the result. The
// truth is the noiseless evaluation under `rule`.
BiasVarianceReport monte_carlo_bias_variance(const SyntheticTreeSpec& spec, const NoiseModel& noise, SimRule rule,
                                             long runs, std::uint64_t seed, int workers = 1);

struct RobustnessRow {
  SimRule rule;
  NoiseKind kind;
  double alpha;
  double mse;  // mean over the family
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;  // rule-major, then kind, then alpha
};

// Full factorial sweep. Every cell reuses the same seed, so cells differ only
// in the rule or noise level (common random numbers).
RobustnessReport robustness_sweep(const std::vector<SyntheticTreeSpec>& family, const std::vector<SimRule>& rules,
                                  const std::vector<double>& alphas, const std::vector<NoiseKind>& kinds, long runs,
                                  std::uint64_t seed, int workers = 1);

struct ScalabilityRow {
  int depth = 0;
  std::size_t nodes = 0;
  long grounder_calls = 0;
  long agent_calls = 0;
  double wall_ms = 0.0;
};

struct ScalabilityReport {
  std::vector<ScalabilityRow> rows;
};

// run_recursive with synthetic agents whose calls all sleep `latency`, with
// `workers` concurrent calls, once per recursion depth.
ScalabilityReport scalability_benchmark(int branching, const std::vector<int>& depths,
                                        std::chrono::milliseconds latency, int workers, std::uint64_t seed);

// CSV with a header row; an empty report yields the header alone.
std::string emit_plot_data(const BiasVarianceReport& report);
std::string emit_plot_data(const RobustnessReport& report);
std::string emit_plot_data(const ScalabilityReport& report);
std::string emit_plot_data(const std::vector<GridPoint>& grid);

}  // namespace spr
