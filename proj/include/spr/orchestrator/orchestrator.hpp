#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/agents/agent.hpp"
#include "spr/agents/retry.hpp"
#include "spr/core/tree.hpp"
#include "spr/orchestrator/config.hpp"

namespace spr {

struct Agents {
  Agent* analyzer = nullptr;
  Agent* grounder = nullptr;
  Agent* synthesizer = nullptr;
};

struct RunCounters {
  long analyzer_calls = 0;
  long grounder_calls = 0;
  long synthesizer_calls = 0;
  long retries = 0;
  long grounder_failures = 0;
  long synthesizer_failures = 0;
  long agent_calls() const { return analyzer_calls + grounder_calls + synthesizer_calls; }
};

struct RunTimings {
  double analyze_ms = 0;
  double synthesize_ms = 0;
};

// Bookkeeping shared by all orchestration entry points. `flagged` lists nodes
// whose value came from the failure policy or a clamp, id-sorted.
struct RunStats {
  RunCounters counters;
  RunTimings timings;
  std::vector<NodeId> flagged;

  void merge(const RunStats& other);
};

struct RunResult {
  PropositionTree tree;
  RunStats stats;
};

// Raised when the analyzer stays invalid after its retries; carries the tree
// as it stood before the failed step.
class AnalysisExhaustedError : public AgentExhaustedError {
 public:
  AnalysisExhaustedError(const AgentExhaustedError& cause, PropositionTree partial)
      : AgentExhaustedError(cause), partial_(std::move(partial)) {}
  const PropositionTree& partial_tree() const noexcept { return partial_; }

 private:
  PropositionTree partial_;
};

// Expands leaves until the tree has at least L_max leaves, the analyzer
// returns an empty list, or T_max steps have run. The last batch may
// overshoot L_max.
PropositionTree analyze(const PropositionTree& tree, Agent& analyzer, const RunConfig& config,
                        RunStats* stats = nullptr);

// Grounds every leaf under `node` that has no value yet and synthesizes every
// internal node under it bottom-up, a parent as soon as its children finish.
// At most config.max_concurrent_prove agent calls run at once.
PropositionTree synthesize(const PropositionTree& tree, const NodeId& node, Agent& grounder, Agent& synthesizer,
                           const RunConfig& config, RunStats* stats = nullptr);

RunResult run(const std::string& query, const Agents& agents, const RunConfig& config);

// Depth-n analysis: every leaf of a depth-k analysis is analyzed again as the root
// of a fresh sub-run, n-1 times, and the sub-trees are grafted in place. Only
// the final leaves are grounded; one synthesis pass runs at the end.
RunResult run_recursive(const std::string& query, const Agents& agents, const RunConfig& config);

struct NodeEdit {
  NodeId id;
  std::optional<double> p_true;
  std::optional<std::string> statement;
};

struct DeltaEntry {
  NodeId id;
  std::optional<double> old_p_true;
  double new_p_true = 0;
};

struct ResynthesisResult {
  PropositionTree tree;
  std::vector<NodeId> edited;  // edits that changed something, id-sorted
  std::vector<NodeId> dirty;   // re-synthesized nodes, deepest first
  std::vector<DeltaEntry> delta;
  RunStats stats;
};

// Applies the edits and re-synthesizes only the proper ancestors of the
// changed nodes, deepest first. A statement edit on a leaf re-grounds it when
// a grounder is given and no p_true is supplied. Leaves that have no value
// (new structure) are grounded first and count as edits. All-or-nothing:
// any error leaves the input untouched.
ResynthesisResult resynthesize(const PropositionTree& tree, const std::vector<NodeEdit>& edits, Agent& synthesizer,
                               const RunConfig& config, Agent* grounder = nullptr);

// P(option 2) for a task with two mutually exclusive options.
double binary_complement(double p_option1);

nlohmann::json run_manifest(const std::string& query, const RunConfig& config, const nlohmann::json& agents,
                            const std::string& tree_ref, const RunStats& stats);

// Text handed to each agent role; exposed for context-locality checks.
std::string analyzer_user_message(const PropositionTree& tree, int step);
std::string grounder_user_message(const PropositionNode& node);
nlohmann::json synthesizer_payload(const PropositionTree& tree, const NodeId& node);

}  // namespace spr
