#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/agents/factory.hpp"
#include "spr/orchestrator/orchestrator.hpp"
#include "spr/simlab/random.hpp"
#include "spr/simlab/synthetic.hpp"

namespace spr::testing {

inline std::string fixture_path(const std::string& name) { return std::string(SPR_FIXTURE_DIR) + "/" + name; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json load_fixture(const std::string& name) {
  return nlohmann::json::parse(read_text(fixture_path(name)));
}

struct PipelineAgents {
  std::unique_ptr<Agent> analyzer;
  std::unique_ptr<Agent> grounder;
  std::unique_ptr<Agent> synthesizer;

  Agents view() const { return {analyzer.get(), grounder.get(), synthesizer.get()}; }
};

inline PipelineAgents pipeline_agents(const nlohmann::json& pipeline) {
  const auto& a = pipeline.at("agents");
  return {make_agent(a.at("analyzer"), AgentRole::Analyzer), make_agent(a.at("grounder"), AgentRole::Grounder),
          make_agent(a.at("synthesizer"), AgentRole::Synthesizer)};
}

inline RunConfig pipeline_config(const nlohmann::json& pipeline) {
  return RunConfig::from_json(pipeline.at("config"));
}

// The fully synthesized golden replay tree.
inline RunResult golden_run(int concurrency = 20) {
  auto doc = load_fixture("golden_pipeline.json");
  auto agents = pipeline_agents(doc);
  RunConfig config = pipeline_config(doc);
  config.max_concurrent_prove = concurrency;
  return run(doc.at("query").get<std::string>(), agents.view(), config);
}

// Leaf values the golden grounder reports, in id order.
inline std::vector<double> golden_leaf_values() {
  auto doc = load_fixture("golden_pipeline.json");
  std::vector<double> out;
  for (const auto& [_, answer] : doc["agents"]["grounder"]["fixture"]["outputs"].items())
    out.push_back(answer.at("p_true").get<double>());
  return out;
}

// Depth-1, K=4 equal-weight trees whose leaf truths are resampled (with
// replacement) from the golden leaf values.
inline std::vector<SyntheticTreeSpec> golden_leaf_family(int members, std::uint64_t seed) {
  auto pool = golden_leaf_values();
  RandomStream rng(seed, 0);
  std::vector<SyntheticTreeSpec> family;
  for (int m = 0; m < members; ++m) {
    SyntheticTreeSpec s;
    s.depth = 1;
    s.branching = 4;
    std::vector<double> leaves;
    for (int j = 0; j < 4; ++j) leaves.push_back(pool[rng.below(pool.size())]);
    s.leaf_values = leaves;
    family.push_back(s);
  }
  return family;
}

}  // namespace spr::testing
