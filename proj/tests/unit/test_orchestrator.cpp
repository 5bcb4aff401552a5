#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <set>

#include "spr/agents/scripted.hpp"
#include "spr/core/document.hpp"
#include "spr/orchestrator/orchestrator.hpp"
#include "spr/simlab/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace spr;
using nlohmann::json;
namespace st = spr::testing;

namespace {

NodeId id(const char* text) { return NodeId::parse(text); }

// Forwards to another agent and keeps every request.
class RecordingAgent final : public Agent {
 public:
  explicit RecordingAgent(Agent& inner) : inner_(inner) {}
  std::string complete(const AgentRequest& request) override {
    {
      std::lock_guard lock(mu_);
      requests_.push_back(request);
    }
    return inner_.complete(request);
  }
  std::vector<AgentRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  Agent& inner_;
  mutable std::mutex mu_;
  std::vector<AgentRequest> requests_;
};

json expansion(const std::string& parent, const std::vector<std::string>& kids) {
  json children = json::object();
  for (const auto& k : kids) children[k] = "Statement for " + k + ".";
  return {{"parent", parent}, {"children", children}, {"causality", "test"}};
}

std::vector<std::string> kids_of(const std::string& parent, int k) {
  std::vector<std::string> out;
  for (int j = 1; j <= k; ++j) out.push_back((parent == "P0" ? "P" : parent + ".") + std::to_string(j));
  return out;
}

RunConfig base_config() {
  RunConfig c;
  c.created_at = "2025-01-01T00:00:00Z";
  c.current_date = "2024-06-01";
  return c;
}

json grounder_fixture(double value) {
  return {{"default", {{"p_true", value}, {"key_factor", "constant"}}}};
}

// Synthesizer answering with each node's stored linear record.
std::unique_ptr<Agent> record_synthesizer(const PropositionTree& tree) {
  std::map<std::string, json> answers;
  for (const auto& nid : internal_nodes(tree)) {
    const auto& rec = std::get<LinearRecord>(*tree.node(nid).synthesis);
    answers[nid.str()] = {{"beta", beta_map_to_json(rec)}, {"key_factor", "stored weights"}};
  }
  return std::make_unique<FunctionAgent>(
      [answers](const AgentRequest& r) { return fenced_response("Stored weights.", answers.at(r.node_id)); });
}

struct Depth1 {
  json doc = st::load_fixture("depth1_pipeline.json");
  st::PipelineAgents agents = st::pipeline_agents(doc);
  RunConfig config = st::pipeline_config(doc);
};

}  // namespace

TEST_CASE("analyze stops once the leaf budget is reached") {
  json fixture{{"outputs",
                {{"P0@1", json::array({expansion("P0", kids_of("P0", 4))})},
                 {"P0@2", json::array({expansion("P1", kids_of("P1", 5)), expansion("P2", kids_of("P2", 4)),
                                       expansion("P3", kids_of("P3", 4)), expansion("P4", kids_of("P4", 4))})},
                 {"P0@3", json::array({expansion("P1.1", kids_of("P1.1", 2))})}}},
               {"default", json::array()}};
  ScriptedAgent analyzer(fixture);
  RecordingAgent rec(analyzer);
  RunConfig c = base_config();
  c.max_leaves = 10;
  RunStats stats;
  auto tree = analyze(create_tree("Q", "2025-01-01T00:00:00Z"), rec, c, &stats);
  CHECK(leaves(tree).size() == 17);
  CHECK(rec.requests().size() == 2);
  CHECK(stats.counters.analyzer_calls == 2);
  CHECK(rec.requests()[1].step == 2);
  CHECK(rec.requests()[1].node_id == "P0");

  SUBCASE("step bound") {
    json two{{"outputs", {{"P0@1", json::array({expansion("P0", kids_of("P0", 2))})}}},
             {"default", json::array({expansion("P1", kids_of("P1", 2))})}};
    ScriptedAgent a(two);
    RunConfig one = base_config();
    one.max_steps = 1;
    auto t = analyze(create_tree("Q", "2025-01-01T00:00:00Z"), a, one);
    CHECK(leaves(t).size() == 2);
  }
}

TEST_CASE("analyze retries a duplicate id and accepts the corrected batch") {
  json dup = json::array({expansion("P0", {"P1", "P2"}), expansion("P0", {"P2"})});
  json fixed = json::array({expansion("P0", {"P1", "P2"})});
  ScriptedAgent analyzer(json{{"outputs", {{"P0@1", {{"attempts", {dup, fixed}}}}}}, {"default", json::array()}});
  RecordingAgent rec(analyzer);
  RunStats stats;
  auto tree = analyze(create_tree("Q", "2025-01-01T00:00:00Z"), rec, base_config(), &stats);
  CHECK(tree.size() == 3);
  CHECK(stats.counters.retries == 1);
  auto reqs = rec.requests();
  REQUIRE(reqs.size() == 3);  // failed attempt, corrected attempt, empty step 2
  CHECK(reqs[1].attempt == 1);
  CHECK(reqs[1].messages.size() == 4);
  CHECK(reqs[1].messages[2].role == "assistant");
  CHECK(reqs[1].messages[3].content.find("P2") != std::string::npos);
}

TEST_CASE("analyzer exhaustion carries the partial tree") {
  ScriptedAgent analyzer(json{{"outputs", {{"P0@1", json::array({expansion("P0", kids_of("P0", 3))})}}},
                              {"default", "I would rather not answer in JSON."}});
  RunConfig c = base_config();
  c.max_exception_retry = 2;
  try {
    analyze(create_tree("Q", "2025-01-01T00:00:00Z"), analyzer, c);
    FAIL("expected AnalysisExhaustedError");
  } catch (const AnalysisExhaustedError& e) {
    CHECK(e.code() == ErrorCode::AgentExhausted);
    CHECK(e.attempts() == 3);
    CHECK(e.partial_tree().size() == 4);
  }
}

TEST_CASE("single-node run grounds P0 only") {
  ScriptedAgent analyzer(json{{"default", json::array()}});
  ScriptedAgent grounder(grounder_fixture(0.42));
  ScriptedAgent synthesizer(json{{"default", "unused"}});
  RecordingAgent g(grounder), s(synthesizer);
  auto result = run("Q", {&analyzer, &g, &s}, base_config());
  CHECK(result.tree.size() == 1);
  CHECK(result.tree.node(id("P0")).status == NodeStatus::Grounded);
  CHECK(result.tree.node(id("P0")).p_true == 0.42);
  CHECK(g.requests().size() == 1);
  CHECK(s.requests().empty());
  CHECK(result.stats.counters.synthesizer_calls == 0);

  SUBCASE("L_max = 1 never calls the analyzer") {
    RecordingAgent a(analyzer);
    RunConfig c = base_config();
    c.max_leaves = 1;
    auto r = run("Q", {&a, &grounder, &synthesizer}, c);
    CHECK(a.requests().empty());
    CHECK(r.tree.size() == 1);
  }
}

TEST_CASE("golden replay") {
  auto result = st::golden_run();
  const auto& t = result.tree;
  CHECK(*t.node(id("P1.1")).p_true == doctest::Approx(0.855).epsilon(1e-9));
  CHECK(*t.node(id("P1")).p_true == doctest::Approx(0.80034).epsilon(1e-6));
  CHECK(*t.node(id("P0")).p_true == doctest::Approx(0.878618).epsilon(1e-6));
  CHECK(t.node(id("P0")).status == NodeStatus::Synthesized);
  CHECK(result.stats.counters.grounder_calls == 17);
  CHECK(result.stats.counters.synthesizer_calls == 9);
  CHECK(result.stats.flagged.empty());
  CHECK(validate_tree(t).empty());
}

TEST_CASE("golden tree document") {
  std::string text = serialize_tree(st::golden_run().tree);
  const std::string path = st::fixture_path("golden_tree.json");
  if (std::getenv("SPR_UPDATE_GOLDEN")) std::ofstream(path, std::ios::binary) << text;
  CHECK(text == st::read_text(path));
}

TEST_CASE("concurrency cap does not change the result") {
  std::string one = serialize_tree(st::golden_run(1).tree);
  for (int cap : {2, 4, 20, 64}) CHECK(serialize_tree(st::golden_run(cap).tree) == one);
}

TEST_CASE("failure policy") {
  Depth1 d;
  SUBCASE("a failing leaf gets the neutral value and a flag") {
    auto fixture = d.doc["agents"]["grounder"]["fixture"];
    fixture["outputs"]["P3"] = "Search results were inconclusive.";
    ScriptedAgent grounder(fixture);
    RecordingAgent g(grounder);
    auto r = run(d.doc["query"], {d.agents.analyzer.get(), &g, d.agents.synthesizer.get()}, d.config);
    CHECK(r.tree.node(id("P3")).p_true == 0.5);
    CHECK(r.stats.flagged == std::vector<NodeId>{id("P3")});
    CHECK(r.stats.counters.grounder_failures == 1);
    // 1 + max_proof_retries attempts on P3, one on each other leaf
    CHECK(g.requests().size() == 3 + 1 + d.config.max_proof_retries);
    double by_hand = 0.05 + 0.2 * 0.7895 + 0.3 * 0.904 + 0.3 * 0.5 + 0.15 * 0.755;
    CHECK(*r.tree.node(id("P0")).p_true == doctest::Approx(by_hand).epsilon(1e-12));
  }
  SUBCASE("root synthesis exhaustion fails the run") {
    ScriptedAgent synthesizer(json{{"default", "No structured answer."}});
    try {
      run(d.doc["query"], {d.agents.analyzer.get(), d.agents.grounder.get(), &synthesizer}, d.config);
      FAIL("expected RunFailed");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RunFailed);
    }
  }
  SUBCASE("out-of-range coefficients are clamped after the retries") {
    json beta{{"beta_0", 0.1}, {"P1", 0.9}, {"P2", 0.9}, {"P3", 0.9}, {"P4", 0.9}};
    ScriptedAgent synthesizer(json{{"default", {{"beta", beta}, {"key_factor", "k"}}}});
    auto r = run(d.doc["query"], {d.agents.analyzer.get(), d.agents.grounder.get(), &synthesizer}, d.config);
    CHECK(r.tree.node(id("P0")).p_true == 1.0);
    CHECK(r.stats.flagged == std::vector<NodeId>{id("P0")});
    CHECK(r.stats.counters.synthesizer_calls == 1 + d.config.max_exception_retry);
    CHECK(r.tree.node(id("P0")).report->find("clamped") != std::string::npos);
  }
  SUBCASE("an inner synthesis failure degrades to the neutral value") {
    auto doc = st::load_fixture("golden_pipeline.json");
    doc["agents"]["synthesizer"]["fixture"]["outputs"]["P1.1"] = "Unstructured.";
    auto agents = st::pipeline_agents(doc);
    auto r = run(doc["query"], agents.view(), st::pipeline_config(doc));
    CHECK(r.tree.node(id("P1.1")).p_true == 0.5);
    CHECK(std::holds_alternative<VanillaRecord>(*r.tree.node(id("P1.1")).synthesis));
    CHECK(r.stats.flagged == std::vector<NodeId>{id("P1.1")});
    double p1 = 0.05 + 0.25 * 0.5 + 0.25 * *r.tree.node(id("P1.2")).p_true +
                0.30 * *r.tree.node(id("P1.3")).p_true + 0.15 * *r.tree.node(id("P1.4")).p_true;
    CHECK(*r.tree.node(id("P1")).p_true == doctest::Approx(p1).epsilon(1e-12));
  }
}

TEST_CASE("average rule needs no synthesizer") {
  Depth1 d;
  d.config.rule = RuleKind::Average;
  RecordingAgent s(*d.agents.synthesizer);
  auto r = run(d.doc["query"], {d.agents.analyzer.get(), d.agents.grounder.get(), &s}, d.config);
  CHECK(s.requests().empty());
  CHECK(*r.tree.node(id("P0")).p_true == doctest::Approx((0.7895 + 0.904 + 0.932 + 0.755) / 4));
}

TEST_CASE("context locality: each synthesizer call sees one node and its children") {
  auto doc = st::load_fixture("golden_pipeline.json");
  auto agents = st::pipeline_agents(doc);
  RecordingAgent s(*agents.synthesizer);
  auto r = run(doc["query"], {agents.analyzer.get(), agents.grounder.get(), &s}, st::pipeline_config(doc));
  auto reqs = s.requests();
  REQUIRE(reqs.size() == 9);
  for (const auto& req : reqs) {
    auto payload = json::parse(req.messages.at(1).content);
    const auto& node = r.tree.node(NodeId::parse(req.node_id));
    CHECK(payload["proposition_id"] == req.node_id);
    std::set<std::string> expected, seen;
    for (const auto& c : node.children) expected.insert(c.str());
    for (const auto& [k, _] : payload["children"].items()) seen.insert(k);
    CHECK(seen == expected);
    // No id outside the node's family appears anywhere in the prompt.
    for (const auto& [other, _] : r.tree.nodes()) {
      if (other.str() == req.node_id || expected.count(other.str())) continue;
      CHECK(req.messages.at(1).content.find("\"" + other.str() + "\"") == std::string::npos);
    }
  }
}

TEST_CASE("recursive runs") {
  SyntheticAgentOptions opts;
  opts.branching = 3;
  auto analyzer = synthetic_analyzer(opts);
  auto grounder = synthetic_grounder(opts);
  auto synthesizer = synthetic_synthesizer(opts);
  Agents agents{analyzer.get(), grounder.get(), synthesizer.get()};
  RunConfig c = base_config();
  c.max_leaves = 3;
  c.max_steps = 1;

  std::size_t expected[] = {0, 4, 13, 40};
  for (int n = 1; n <= 3; ++n) {
    c.recursion_depth = n;
    auto r = run_recursive("Root.", agents, c);
    CHECK(r.tree.size() == expected[n]);
    CHECK(leaves(r.tree).size() == static_cast<std::size_t>(std::pow(3, n)));
    CHECK(validate_tree(r.tree).empty());
    CHECK(*r.tree.node(id("P0")).p_true == doctest::Approx(0.7));
  }
  c.recursion_depth = 2;
  auto grafted = run_recursive("Root.", agents, c).tree;
  CHECK(grafted.contains(id("P2.3")));
  CHECK(grafted.node(id("P2.3")).statement.find("Factor 3") == 0);

  SUBCASE("n = 1 is a plain run") {
    c.recursion_depth = 1;
    CHECK(serialize_tree(run_recursive("Root.", agents, c).tree) == serialize_tree(run("Root.", agents, c).tree));
  }
  SUBCASE("sequential mode honours the leaf budget") {
    c.recursion_mode = RecursionMode::Sequential;
    c.recursion_leaf_budget = 5;
    auto r = run_recursive("Root.", agents, c);
    CHECK(r.tree.size() == 7);  // only P1 was re-analyzed
    CHECK(r.tree.contains(id("P1.3")));
    CHECK_FALSE(r.tree.contains(id("P2.1")));
  }
  SUBCASE("parallel and sequential modes agree without a budget") {
    c.recursion_depth = 3;
    auto par = run_recursive("Root.", agents, c);
    c.recursion_mode = RecursionMode::Sequential;
    CHECK(run_recursive("Root.", agents, c).tree.nodes() == par.tree.nodes());
  }
}

TEST_CASE("resynthesize the depth-1 fixture") {
  Depth1 d;
  auto base = run(d.doc["query"], d.agents.view(), d.config).tree;
  CHECK(*base.node(id("P0")).p_true == doctest::Approx(0.87195).epsilon(1e-12));
  RecordingAgent s(*d.agents.synthesizer);

  auto r = resynthesize(base, {{id("P2"), 1.0, std::nullopt}}, s, d.config);
  CHECK(*r.tree.node(id("P0")).p_true == doctest::Approx(0.9008).epsilon(1e-4));
  CHECK(*r.tree.node(id("P0")).p_true == doctest::Approx(*base.node(id("P0")).p_true + 0.3 * 0.096));
  CHECK(s.requests().size() == 1);
  CHECK(r.edited == std::vector<NodeId>{id("P2")});
  CHECK(r.dirty == std::vector<NodeId>{id("P0")});
  REQUIRE(r.delta.size() == 2);
  CHECK(r.delta[0].id == id("P0"));
  CHECK(r.delta[0].old_p_true == base.node(id("P0")).p_true);
  CHECK(r.delta[1].id == id("P2"));
  CHECK(r.delta[1].new_p_true == 1.0);
  for (const char* untouched : {"P1", "P3", "P4"}) CHECK(r.tree.node(id(untouched)) == base.node(id(untouched)));

  SUBCASE("no-op edit") {
    RecordingAgent s2(*d.agents.synthesizer);
    auto noop = resynthesize(base, {{id("P2"), 0.904, std::nullopt}}, s2, d.config);
    CHECK(noop.delta.empty());
    CHECK(noop.dirty.empty());
    CHECK(s2.requests().empty());
    CHECK(noop.tree == base);
  }
  SUBCASE("unknown node") {
    try {
      resynthesize(base, {{id("P9"), 0.5, std::nullopt}}, s, d.config);
      FAIL("expected NotFound");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotFound);
    }
  }
  SUBCASE("invalid batch is rejected as a whole") {
    auto copy = base;
    CHECK_THROWS_AS(resynthesize(base, {{id("P1"), 0.1, std::nullopt}, {id("P2"), 1.5, std::nullopt}}, s, d.config),
                    Error);
    CHECK(base == copy);
  }
  SUBCASE("statement edit re-grounds the leaf") {
    ScriptedAgent grounder(grounder_fixture(0.1));
    auto re = resynthesize(base, {{id("P4"), std::nullopt, "A new statement."}}, s, d.config, &grounder);
    CHECK(re.tree.node(id("P4")).p_true == 0.1);
    CHECK(re.tree.node(id("P4")).statement == "A new statement.");
    CHECK(*re.tree.node(id("P0")).p_true ==
          doctest::Approx(*base.node(id("P0")).p_true + 0.15 * (0.1 - 0.755)).epsilon(1e-12));
  }
}

TEST_CASE("property: incremental resynthesis equals a full pass") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RunConfig c = base_config();
  ScriptedAgent unused_grounder(grounder_fixture(0.5));
  for (int trial = 0; trial < 50; ++trial) {
    SyntheticTreeSpec spec;
    spec.depth = 1 + trial % 3;
    spec.branching = 2 + trial % 3;
    spec.weights = WeightScheme::Dirichlet;
    spec.seed = rng();
    auto synth_tree = generate_synthetic_tree(spec).tree;
    auto synthesizer = record_synthesizer(synth_tree);
    auto base = synthesize(synth_tree, synth_tree.root(), unused_grounder, *synthesizer, c);

    auto ls = leaves(base);
    std::vector<NodeEdit> edits;
    std::set<NodeId> expected_dirty;
    auto full_input = base;
    for (const auto& leaf : ls) {
      double roll = u(rng);
      if (roll > 0.4) continue;
      double v = roll < 0.05 ? *base.node(leaf).p_true : std::round(u(rng) * 1000) / 1000;
      edits.push_back({leaf, v, std::nullopt});
      if (v != *base.node(leaf).p_true)
        for (const auto& a : base.ancestors_of(leaf)) expected_dirty.insert(a);
      full_input.node(leaf).p_true = v;
    }
    RecordingAgent s(*synthesizer);
    auto inc = resynthesize(base, edits, s, c);
    auto full = synthesize(full_input, full_input.root(), unused_grounder, *synthesizer, c);
    CHECK(serialize_tree(inc.tree) == serialize_tree(full));
    CHECK(s.requests().size() == expected_dirty.size());
    CHECK(std::set<NodeId>(inc.dirty.begin(), inc.dirty.end()) == expected_dirty);
    for (std::size_t i = 1; i < inc.dirty.size(); ++i)
      CHECK(base.depth_of(inc.dirty[i - 1]) >= base.depth_of(inc.dirty[i]));
  }
}

TEST_CASE("binary complement") {
  CHECK(binary_complement(0.3) == doctest::Approx(0.7));
  CHECK(binary_complement(0.5) == 0.5);
  CHECK(binary_complement(1.0) == 0.0);
  CHECK_THROWS_AS(binary_complement(-0.1), Error);
}

TEST_CASE("run manifest") {
  auto result = st::golden_run();
  RunConfig c = st::pipeline_config(st::load_fixture("golden_pipeline.json"));
  auto m = run_manifest("Q", c, nullptr, "sha256:abc", result.stats);
  std::set<std::string> keys;
  for (const auto& [k, _] : m.items()) keys.insert(k);
  CHECK(keys == std::set<std::string>{"agents", "config", "counters", "flagged", "query", "timings", "tree_ref"});
  CHECK(m["config"]["L_max"] == 20);
  CHECK(m["config"]["n"] == 1);
  CHECK(m["counters"]["agent_calls"] == 4 + 17 + 9);  // step 4 returns the completion signal
  CHECK(m["tree_ref"] == "sha256:abc");
  CHECK(m["flagged"].empty());
}

TEST_CASE("run config round trip and validation") {
  RunConfig c = base_config();
  c.decision_threshold = 0.4;
  c.recursion_leaf_budget = 30;
  auto back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_THROWS_AS(RunConfig::from_json({{"L_max", 0}}), Error);
  CHECK_THROWS_AS(RunConfig::from_json({{"unknown", 1}}), Error);
  CHECK_THROWS_AS(RunConfig::from_json({{"concurrency", 0}}), Error);
}
