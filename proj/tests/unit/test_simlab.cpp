#include <doctest.h>

#include <cmath>
#include <random>

#include "spr/simlab/experiments.hpp"
#include "spr/simlab/noise.hpp"
#include "spr/simlab/random.hpp"
#include "spr/simlab/synthetic.hpp"
#include "spr/synthesis/beta_path.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace spr;

namespace {

SyntheticTreeSpec flat(int k, std::vector<double> leaves) {
  SyntheticTreeSpec s;
  s.depth = 1;
  s.branching = k;
  s.leaf_values = std::move(leaves);
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an spr::Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("random streams") {
  RandomStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  for (int i = 0; i < 100; ++i) {
    auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
  RandomStream u(1, 0);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    sum += x;
    sq += x * x;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
  RandomStream g(2, 0);
  double gs = 0, gq = 0;
  for (int i = 0; i < n; ++i) {
    double x = g.normal();
    gs += x;
    gq += x * x;
  }
  CHECK(std::fabs(gs / n) < 0.01);
  CHECK(gq / n == doctest::Approx(1.0).epsilon(0.02));
  RandomStream k(3, 0);
  for (int i = 0; i < 1000; ++i) CHECK(k.below(7) < 7);
}

TEST_CASE("apply_noise") {
  RandomStream rng(5, 0);
  for (int i = 0; i < 100; ++i) CHECK(apply_noise(0.2, {NoiseKind::Reverse, 1.0}, rng) == doctest::Approx(0.8));
  for (int i = 0; i < 100; ++i) CHECK(apply_noise(0.37, {NoiseKind::Uncertain, 0.0}, rng) == 0.37);
  for (int i = 0; i < 100; ++i) CHECK(apply_noise(0.37, {NoiseKind::Reverse, 0.0}, rng) == 0.37);
  double lo = 1, hi = 0;
  bool hit_ceiling = false;
  for (int i = 0; i < 10000; ++i) {
    double v = apply_noise(0.95, {NoiseKind::Normal, 0.2}, rng);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    hit_ceiling |= v == 1.0;
  }
  CHECK(lo >= 0.95);
  CHECK(hi <= 1.0);
  CHECK(hit_ceiling);

  SUBCASE("uncertain replaces with the stated frequency") {
    int replaced = 0;
    for (int i = 0; i < 20000; ++i) replaced += apply_noise(0.5, {NoiseKind::Uncertain, 0.3}, rng) != 0.5;
    CHECK(replaced / 20000.0 == doctest::Approx(0.3).epsilon(0.05));
  }
  SUBCASE("additive noise has the requested spread") {
    double s = 0, q = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      double v = apply_noise(0.5, {NoiseKind::Additive, 0.0, 0.2, 0.0}, rng);
      s += v;
      q += v * v;
    }
    CHECK(s / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(q / n - (s / n) * (s / n) == doctest::Approx(0.04).epsilon(0.03));
  }
  SUBCASE("errors") {
    CHECK(code_of([&] { apply_noise(1.2, {NoiseKind::Normal, 0.1}, rng); }) == ErrorCode::InvalidInput);
    CHECK(code_of([] { NoiseModel{NoiseKind::Normal, 1.5}.validate(); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { NoiseModel::from_json({{"kind", "gaussian"}}); }) == ErrorCode::InvalidSpec);
    auto m = NoiseModel::from_json({{"kind", "reverse"}, {"alpha", 0.3}});
    CHECK(m.kind == NoiseKind::Reverse);
    CHECK(m.alpha == 0.3);
  }
}

TEST_CASE("generate_synthetic_tree") {
  SUBCASE("equal weights over fixed leaves") {
    auto st = generate_synthetic_tree(flat(4, {0.2, 0.4, 0.6, 0.8}));
    CHECK(st.root_truth == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(st.tree.size() == 5);
    CHECK(*st.tree.node(st.tree.root()).p_true == doctest::Approx(0.5));
    CHECK(validate_tree(st.tree).empty());
  }
  SUBCASE("depth 0 is a single leaf") {
    SyntheticTreeSpec s;
    s.depth = 0;
    s.leaf_values = std::vector<double>{0.3};
    auto st = generate_synthetic_tree(s);
    CHECK(st.tree.size() == 1);
    CHECK(st.root_truth == 0.3);
  }
  SUBCASE("seeded dirichlet trees are reproducible") {
    SyntheticTreeSpec s;
    s.depth = 3;
    s.branching = 3;
    s.weights = WeightScheme::Dirichlet;
    s.seed = 99;
    auto a = generate_synthetic_tree(s);
    auto b = generate_synthetic_tree(s);
    CHECK(a.tree == b.tree);
    CHECK(a.root_truth == b.root_truth);
    s.seed = 100;
    CHECK_FALSE(generate_synthetic_tree(s).tree == a.tree);
  }
  SUBCASE("invalid specs") {
    SyntheticTreeSpec s;
    s.weights = WeightScheme::Fixed;
    s.fixed_weights = {0.5, 0.5};
    CHECK(code_of([&] { generate_synthetic_tree(s); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { generate_synthetic_tree(flat(4, {0.1, 0.2})); }) == ErrorCode::InvalidSpec);
    SyntheticTreeSpec over;
    over.branching = 2;
    over.weights = WeightScheme::Fixed;
    over.fixed_weights = {0.9, 0.9};
    over.intercept = 0.1;
    over.leaf_values = std::vector<double>{1.0, 1.0};
    CHECK(code_of([&] { generate_synthetic_tree(over); }) == ErrorCode::InvalidSpec);
    CHECK(code_of([] { SyntheticTreeSpec::from_json({{"depth", 1}, {"colour", "red"}}); }) == ErrorCode::InvalidSpec);
  }
  SUBCASE("json round trip") {
    SyntheticTreeSpec s;
    s.weights = WeightScheme::Dirichlet;
    s.dirichlet_mass = 0.8;
    s.seed = 4;
    auto back = SyntheticTreeSpec::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
  }
}

TEST_CASE("property: synthetic records satisfy the linear constraints and beta paths match recursion") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    SyntheticTreeSpec s;
    s.depth = 1 + static_cast<int>(seed % 3);
    s.branching = 2 + static_cast<int>(seed % 3);
    s.weights = WeightScheme::Dirichlet;
    s.dirichlet_mass = 0.5 + 0.5 * static_cast<double>(seed % 5) / 5.0;
    s.seed = seed;
    auto st = generate_synthetic_tree(s);
    for (const auto& id : internal_nodes(st.tree)) {
      const auto& rec = std::get<LinearRecord>(*st.tree.node(id).synthesis);
      CHECK(std::fabs(rec.beta0) <= kDefaultInterceptBound);
      for (const auto& [_, b] : rec.betas) CHECK(std::fabs(b) < 1.0);
    }
    double oracle = spr::testing::recursive_linear(st.tree, st.tree.root(), st.leaf_truth);
    CHECK(st.root_truth == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(st.root_truth >= 0.0);
    CHECK(st.root_truth <= 1.0);
  }
}

TEST_CASE("rule evaluator") {
  auto st = generate_synthetic_tree(flat(3, {0.5, 0.6, 0.7}));
  CHECK(RuleEvaluator(st.tree, SimRule::LogicAnd).evaluate({0.5, 0.6, 0.7}) == doctest::Approx(0.21));
  CHECK(RuleEvaluator(st.tree, SimRule::LogicOr).evaluate({0.5, 0.6, 0.7}) ==
        doctest::Approx(1 - 0.5 * 0.4 * 0.3));
  CHECK(RuleEvaluator(st.tree, SimRule::Average).evaluate({0.5, 0.6, 0.7}) == doctest::Approx(0.6));
  CHECK(RuleEvaluator(st.tree, SimRule::Linear).evaluate({0.5, 0.6, 0.7}) == doctest::Approx(0.6));
  // 1 - prod(1 - v/3)
  CHECK(RuleEvaluator(st.tree, SimRule::NoisyOr).evaluate({0.5, 0.6, 0.7}) ==
        doctest::Approx(1 - (1 - 0.5 / 3) * (1 - 0.6 / 3) * (1 - 0.7 / 3)));
  CHECK(sim_rule_from_string("logic_and") == SimRule::LogicAnd);
  CHECK_THROWS_AS(sim_rule_from_string("majority"), Error);
}

TEST_CASE("monte carlo bias and variance") {
  SUBCASE("zero noise") {
    for (auto kind : {NoiseKind::Normal, NoiseKind::Uncertain, NoiseKind::Reverse}) {
      auto r = monte_carlo_bias_variance(flat(4, {0.1, 0.3, 0.5, 0.9}), {kind, 0.0}, SimRule::Linear, 100, 1);
      CHECK(r.bias == doctest::Approx(0.0));
      CHECK(r.variance == doctest::Approx(0.0));
      CHECK(r.mse == doctest::Approx(0.0));
    }
  }
  SUBCASE("root variance is sum of beta^2 sigma^2") {
    auto spec = flat(4, {0.5, 0.5, 0.5, 0.5});
    auto r = monte_carlo_bias_variance(spec, {NoiseKind::Additive, 0.0, 0.2, 0.0}, SimRule::Linear, 100000, 3, 4);
    auto st = generate_synthetic_tree(spec);
    std::map<NodeId, double> vars;
    for (const auto& [id, _] : st.leaf_truth) vars[id] = 0.04;
    double predicted = propagate_variance(compute_beta_paths(st.tree), vars);
    CHECK(predicted == doctest::Approx(0.01));
    CHECK(std::fabs(r.variance - predicted) / predicted < 0.10);
  }
  SUBCASE("constant leaf bias passes through weights that sum to one") {
    auto r = monte_carlo_bias_variance(flat(4, {0.4, 0.5, 0.5, 0.6}), {NoiseKind::Additive, 0.0, 0.05, 0.1},
                                       SimRule::Linear, 20000, 9);
    CHECK(r.bias == doctest::Approx(0.1).epsilon(0.02));
  }
  SUBCASE("fewer than two runs") {
    CHECK(code_of([] { monte_carlo_bias_variance(flat(2, {0.5, 0.5}), {}, SimRule::Linear, 1, 0); }) ==
          ErrorCode::InsufficientRuns);
    std::vector<double> one{0.5};
    CHECK(code_of([&] { summarize_estimates(one, 0.5); }) == ErrorCode::InsufficientRuns);
  }
  SUBCASE("identical seeds give identical reports regardless of workers") {
    SyntheticTreeSpec s;
    s.depth = 2;
    s.branching = 3;
    s.weights = WeightScheme::Dirichlet;
    s.seed = 8;
    auto a = monte_carlo_bias_variance(s, {NoiseKind::Uncertain, 0.3}, SimRule::NoisyOr, 5000, 17, 1);
    auto b = monte_carlo_bias_variance(s, {NoiseKind::Uncertain, 0.3}, SimRule::NoisyOr, 5000, 17, 6);
    CHECK(emit_plot_data(a) == emit_plot_data(b));
    CHECK(a.mse == b.mse);
    auto c = monte_carlo_bias_variance(s, {NoiseKind::Uncertain, 0.3}, SimRule::NoisyOr, 5000, 18, 1);
    CHECK(a.mse != c.mse);
  }
}

TEST_CASE("property: mse = bias^2 + variance on every report") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SimRule rules[] = {SimRule::Linear, SimRule::Average, SimRule::NoisyOr, SimRule::LogicAnd, SimRule::LogicOr};
  const NoiseKind kinds[] = {NoiseKind::Normal, NoiseKind::Uncertain, NoiseKind::Reverse, NoiseKind::Additive};
  for (int trial = 0; trial < 60; ++trial) {
    SyntheticTreeSpec s;
    s.depth = 1 + trial % 2;
    s.branching = 2 + trial % 4;
    s.weights = WeightScheme::Dirichlet;
    s.seed = static_cast<std::uint64_t>(trial);
    NoiseModel m{kinds[trial % 4], u(rng), 0.1 * u(rng), 0.05 * (u(rng) - 0.5)};
    auto r = monte_carlo_bias_variance(s, m, rules[trial % 5], 500, rng());
    CHECK(r.residual <= 1e-9);
    CHECK(r.mse == doctest::Approx(r.bias_squared + r.variance).epsilon(1e-9));
  }
}

TEST_CASE("variance shrinks as 1/K for equal weights") {
  std::vector<double> lx, ly;
  for (int k : {2, 4, 8, 16}) {
    auto r = monte_carlo_bias_variance(flat(k, std::vector<double>(k, 0.5)), {NoiseKind::Additive, 0.0, 0.2, 0.0},
                                       SimRule::Linear, 20000, 5, 4);
    CHECK(std::fabs(r.variance - 0.04 / k) / (0.04 / k) < 0.1);
    lx.push_back(std::log(k));
    ly.push_back(std::log(r.variance));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / 4, my += ly[i] / 4;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
  CHECK(sxy / sxx == doctest::Approx(-1.0).epsilon(0.1));
}

TEST_CASE("property: decomposed roots carry less bias than a direct estimate") {
  // Leaf bias is a fraction delta_i of the direct bias B; with path weights
  // summing to at most one the propagated bias stays below B.
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    SyntheticTreeSpec s;
    s.depth = 1 + trial % 3;
    s.branching = 2 + trial % 3;
    s.weights = WeightScheme::Dirichlet;
    s.dirichlet_mass = 0.3 + 0.7 * u(rng);
    s.seed = rng();
    auto st = generate_synthetic_tree(s);
    auto paths = compute_beta_paths(st.tree);
    double weight_sum = 0;
    for (const auto& [_, w] : paths.leaf_weights) weight_sum += w;
    REQUIRE(weight_sum <= 1.0 + 1e-12);
    double direct = 0.05 + 0.2 * u(rng);
    std::map<NodeId, double> biases;
    for (const auto& [id, _] : paths.leaf_weights) biases[id] = (0.01 + 0.98 * u(rng)) * direct;
    CHECK(propagate_bias(paths, biases) < direct);
  }
}

TEST_CASE("robustness sweep") {
  auto family = spr::testing::golden_leaf_family(8, 3);
  std::vector<double> alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  auto report = robustness_sweep(family, {SimRule::Linear, SimRule::LogicAnd, SimRule::NoisyOr}, alphas,
                                 {NoiseKind::Normal, NoiseKind::Uncertain, NoiseKind::Reverse}, 2000, 11, 4);
  REQUIRE(report.rows.size() == 3 * 3 * alphas.size());
  std::map<std::pair<int, int>, std::vector<double>> series;
  for (const auto& row : report.rows) {
    if (row.alpha == 0.0) CHECK(row.mse == 0.0);
    series[{static_cast<int>(row.rule), static_cast<int>(row.kind)}].push_back(row.mse);
  }
  for (const auto& [_, s] : series)
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] >= s[i - 1]);

  double linear = 0, conj = 0;
  for (const auto& row : report.rows) {
    if (row.kind != NoiseKind::Reverse || row.alpha != 0.3) continue;
    if (row.rule == SimRule::Linear) linear = row.mse;
    if (row.rule == SimRule::LogicAnd) conj = row.mse;
  }
  CHECK(linear < conj);

  auto csv = emit_plot_data(report);
  CHECK(csv.rfind("rule,kind,alpha,mse\n", 0) == 0);
  CHECK(csv.find("\nlogic_and,reverse,0.3,") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(report.rows.size() + 1));
  CHECK(emit_plot_data(RobustnessReport{}) == "rule,kind,alpha,mse\n");
  CHECK(robustness_sweep({}, {SimRule::Linear}, alphas, {NoiseKind::Reverse}, 10, 1).rows.empty());
}

TEST_CASE("plot data for other reports") {
  CHECK(emit_plot_data(BiasVarianceReport{}) == "runs,truth,mean,bias,bias_squared,variance,mse,residual\n");
  CHECK(emit_plot_data(ScalabilityReport{}) == "n,nodes,grounder_calls,agent_calls,wall_ms\n");
  std::vector<NodeId> kids{NodeId::parse("P1"), NodeId::parse("P2")};
  LinearRecord rec{0.0, {{kids[0], 0.5}, {kids[1], 0.3}}, ""};
  auto grid = sensitivity_grid(rec, kids, 3);
  auto csv = emit_plot_data(grid);
  CHECK(csv.rfind("c1,c2,f,d1,d2\n", 0) == 0);
  std::istringstream lines(csv);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
    ++rows;
  }
  CHECK(rows == 10);
}

TEST_CASE("synthetic agents drive run_recursive") {
  auto report = scalability_benchmark(2, {1, 2, 3}, std::chrono::milliseconds(0), 8, 1);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].nodes == 3);
  CHECK(report.rows[1].nodes == 7);
  CHECK(report.rows[2].nodes == 15);
  CHECK(report.rows[2].grounder_calls == 8);
  // analyzer calls: 1 + 2 + 4; synthesizer calls: 7 internal nodes
  CHECK(report.rows[2].agent_calls == 7 + 8 + 7);
}

TEST_CASE("one worker serializes every simulated call") {
  const auto latency = std::chrono::milliseconds(5);
  auto report = scalability_benchmark(2, {2}, latency, 1, 1);
  const auto& row = report.rows.at(0);
  double expected = static_cast<double>(row.agent_calls) * 5.0;
  CHECK(row.wall_ms >= expected);
  CHECK(row.wall_ms <= expected * 1.25);
}
