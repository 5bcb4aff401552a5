#include "spr/simlab/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "spr/error.hpp"
#include "spr/orchestrator/orchestrator.hpp"
#include "spr/orchestrator/task_pool.hpp"

namespace spr {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// Root estimates for rounds [0, runs), one Philox stream per (round, leaf).
std::vector<double> simulate_rounds(const RuleEvaluator& eval, const std::vector<double>& truth,
                                    const NoiseModel& noise, long runs, std::uint64_t seed, int workers) {
  std::vector<double> out(static_cast<std::size_t>(runs));
  auto chunk = [&](long lo, long hi) {
    std::vector<double> leaf(truth.size());
    for (long r = lo; r < hi; ++r) {
      for (std::size_t i = 0; i < truth.size(); ++i) {
        RandomStream rng(seed, stream_id(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(i)));
        leaf[i] = apply_noise(truth[i], noise, rng);
      }
      out[static_cast<std::size_t>(r)] = eval.evaluate(leaf);
    }
  };
  if (workers <= 1 || runs < 1024) {
    chunk(0, runs);
    return out;
  }
  TaskPool pool(static_cast<std::size_t>(workers));
  const long step = (runs + workers * 4 - 1) / (workers * 4);
  for (long lo = 0; lo < runs; lo += step) pool.submit([&, lo] { chunk(lo, std::min(runs, lo + step)); });
  pool.wait();
  return out;
}

}  // namespace

BiasVarianceReport summarize_estimates(std::span<const double> x, double truth) {
  if (x.size() < 2) throw Error(ErrorCode::InsufficientRuns, "bias/variance needs at least two runs");
  const double r = static_cast<double>(x.size());
  BiasVarianceReport rep;
  rep.runs = static_cast<long>(x.size());
  rep.truth = truth;
  double sum = 0.0;
  for (double v : x) sum += v;
  rep.mean = sum / r;
  rep.bias = rep.mean - truth;
  rep.bias_squared = rep.bias * rep.bias;
  double var = 0.0, sq = 0.0;
  for (double v : x) {
    var += (v - rep.mean) * (v - rep.mean);
    sq += (v - truth) * (v - truth);
  }
  rep.variance = var / r;
  rep.mse = sq / r;
  rep.residual = std::fabs(rep.mse - rep.bias_squared - rep.variance);
  return rep;
}

BiasVarianceReport monte_carlo_bias_variance(const SyntheticTreeSpec& spec, const NoiseModel& noise, SimRule rule,
                                             long runs, std::uint64_t seed, int workers) {
  noise.validate();
  if (runs < 2) throw Error(ErrorCode::InsufficientRuns, "bias/variance needs at least two runs");
  SyntheticTree st = generate_synthetic_tree(spec);
  RuleEvaluator eval(st.tree, rule);
  std::vector<double> truth;
  for (const auto& id : eval.leaf_order()) truth.push_back(st.leaf_truth.at(id));
  double gt = eval.evaluate(truth);
  auto estimates = simulate_rounds(eval, truth, noise, runs, seed, workers);
  return summarize_estimates(estimates, gt);
}

RobustnessReport robustness_sweep(const std::vector<SyntheticTreeSpec>& family, const std::vector<SimRule>& rules,
                                  const std::vector<double>& alphas, const std::vector<NoiseKind>& kinds, long runs,
                                  std::uint64_t seed, int workers) {
  RobustnessReport report;
  if (family.empty()) return report;
  std::vector<SyntheticTree> trees;
  for (const auto& spec : family) trees.push_back(generate_synthetic_tree(spec));
  for (SimRule rule : rules) {
    std::vector<RuleEvaluator> evals;
    std::vector<std::vector<double>> truths;
    for (const auto& st : trees) {
      evals.emplace_back(st.tree, rule);
      std::vector<double> t;
      for (const auto& id : evals.back().leaf_order()) t.push_back(st.leaf_truth.at(id));
      truths.push_back(std::move(t));
    }
    for (NoiseKind kind : kinds) {
      for (double alpha : alphas) {
        NoiseModel noise{kind, alpha, 0.0, 0.0};
        noise.validate();
        double total = 0.0;
        for (std::size_t m = 0; m < trees.size(); ++m) {
          double gt = evals[m].evaluate(truths[m]);
          auto est = simulate_rounds(evals[m], truths[m], noise, runs, seed + m, workers);
          total += summarize_estimates(est, gt).mse;
        }
        report.rows.push_back({rule, kind, alpha, total / static_cast<double>(trees.size())});
      }
    }
  }
  return report;
}

ScalabilityReport scalability_benchmark(int branching, const std::vector<int>& depths,
                                        std::chrono::milliseconds latency, int workers, std::uint64_t seed) {
  if (branching < 1) throw Error(ErrorCode::InvalidSpec, "branching must be positive");
  SyntheticAgentOptions opts;
  opts.branching = branching;
  opts.analyzer_latency = opts.grounder_latency = opts.synthesizer_latency = latency;
  auto analyzer = synthetic_analyzer(opts);
  auto grounder = synthetic_grounder(opts);
  auto synthesizer = synthetic_synthesizer(opts);
  Agents agents{analyzer.get(), grounder.get(), synthesizer.get()};

  ScalabilityReport report;
  for (int n : depths) {
    RunConfig cfg;
    cfg.max_leaves = branching;
    cfg.max_steps = 1;
    cfg.recursion_depth = n;
    cfg.max_concurrent_prove = workers;
    cfg.seed = seed;
    cfg.current_date = "2025-01-01";
    cfg.created_at = "1970-01-01T00:00:00Z";
    auto start = std::chrono::steady_clock::now();
    RunResult result = run_recursive("Synthetic benchmark root.", agents, cfg);
    auto stop = std::chrono::steady_clock::now();
    report.rows.push_back({n, result.tree.size(), result.stats.counters.grounder_calls,
                           result.stats.counters.agent_calls(),
                           std::chrono::duration<double, std::milli>(stop - start).count()});
  }
  return report;
}

std::string emit_plot_data(const BiasVarianceReport& r) {
  std::string out = "runs,truth,mean,bias,bias_squared,variance,mse,residual\n";
  if (r.runs == 0) return out;
  out += std::to_string(r.runs) + "," + num(r.truth) + "," + num(r.mean) + "," + num(r.bias) + "," +
         num(r.bias_squared) + "," + num(r.variance) + "," + num(r.mse) + "," + num(r.residual) + "\n";
  return out;
}

std::string emit_plot_data(const RobustnessReport& report) {
  std::string out = "rule,kind,alpha,mse\n";
  for (const auto& row : report.rows)
    out += std::string(to_string(row.rule)) + "," + std::string(to_string(row.kind)) + "," + num(row.alpha) + "," +
           num(row.mse) + "\n";
  return out;
}

std::string emit_plot_data(const ScalabilityReport& report) {
  std::string out = "n,nodes,grounder_calls,agent_calls,wall_ms\n";
  for (const auto& row : report.rows)
    out += std::to_string(row.depth) + "," + std::to_string(row.nodes) + "," + std::to_string(row.grounder_calls) +
           "," + std::to_string(row.agent_calls) + "," + num(row.wall_ms) + "\n";
  return out;
}

std::string emit_plot_data(const std::vector<GridPoint>& grid) {
  std::string out = "c1,c2,f,d1,d2\n";
  for (const auto& g : grid)
    out += num(g.c1) + "," + num(g.c2) + "," + num(g.value) + "," + num(g.d1) + "," + num(g.d2) + "\n";
  return out;
}

}  // namespace spr
