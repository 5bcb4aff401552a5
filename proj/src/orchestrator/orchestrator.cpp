#include "spr/orchestrator/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <mutex>
#include <set>

#include "spr/agents/payload.hpp"
#include "spr/agents/prompts.hpp"
#include "spr/orchestrator/task_pool.hpp"
#include "spr/synthesis/rules.hpp"

namespace spr {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Thread-safe accumulator behind RunStats.
struct Accum {
  CallCounters analyzer;
  CallCounters grounder;
  CallCounters synthesizer;
  std::atomic<long> grounder_failures{0};
  std::atomic<long> synthesizer_failures{0};
  std::mutex mu;
  std::set<NodeId> flagged;

  void flag(const NodeId& id) {
    std::lock_guard lock(mu);
    flagged.insert(id);
  }

  void add_to(RunStats* stats) const {
    if (!stats) return;
    RunStats part;
    part.counters.analyzer_calls = analyzer.calls;
    part.counters.grounder_calls = grounder.calls;
    part.counters.synthesizer_calls = synthesizer.calls;
    part.counters.retries = analyzer.retries + grounder.retries + synthesizer.retries;
    part.counters.grounder_failures = grounder_failures;
    part.counters.synthesizer_failures = synthesizer_failures;
    part.flagged.assign(flagged.begin(), flagged.end());
    stats->merge(part);
  }
};

std::string today_utc() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[16];
  std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
  return buf;
}

std::string format_bound(double bound) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", bound);
  return buf;
}

std::string synthesizer_template(RuleKind rule) {
  switch (rule) {
    case RuleKind::Vanilla: return "synthesizer_vanilla";
    case RuleKind::Linear: return "synthesizer_linear";
    case RuleKind::SimpleLogic: return "synthesizer_simple_logic";
    case RuleKind::NoisyOr: return "synthesizer_noisy_or";
    case RuleKind::Average: break;
  }
  throw Error(ErrorCode::Unsupported, "rule needs no synthesizer prompt");
}

void require_agents(const Agents& agents, bool analyzer) {
  if ((analyzer && !agents.analyzer) || !agents.grounder || !agents.synthesizer)
    throw Error(ErrorCode::InvalidConfig, "run needs analyzer, grounder and synthesizer agents");
}

// Result of grounding or synthesizing one node.
struct NodeValue {
  double p_true = 0;
  std::string report;
  std::string key_factor;
  std::optional<SynthesisRecord> record;  // set for internal nodes
  bool flagged = false;
};

NodeValue ground_leaf(Agent& grounder, const PropositionNode& node, const RunConfig& config, Accum& acc) {
  AgentRequest req;
  req.role = AgentRole::Grounder;
  req.node_id = node.id.str();
  req.statement = node.statement;
  req.messages = {{"system", render_prompt("grounder", {{"current_date", config.current_date.value_or(today_utc())}})},
                  {"user", grounder_user_message(node)}};
  try {
    GrounderOutput out = call_with_retry(
        grounder, req, [](const std::string& text) { return parse_grounder_output(text); }, config.max_proof_retries,
        &acc.grounder);
    return {out.p_true, std::move(out.report), std::move(out.key_factor), std::nullopt, false};
  } catch (const Error& e) {
    ++acc.grounder_failures;
    acc.flag(node.id);
    return {config.failure_p_true, std::string("grounding failed: ") + e.what(), "", std::nullopt, true};
  }
}

struct ChildView {
  NodeId id;
  std::string statement;
  double p_true = 0;
  std::string report;
};

nlohmann::json payload_from(const PropositionNode& node, const std::vector<ChildView>& children) {
  nlohmann::json kids = nlohmann::json::object();
  for (const auto& c : children)
    kids[c.id.str()] = {{"statement", c.statement}, {"p_true", c.p_true}, {"report", c.report}};
  return {{"proposition_id", node.id.str()}, {"statement", node.statement}, {"children", std::move(kids)}};
}

double unchecked_linear(const LinearRecord& record, const ChildValues& values) {
  double v = record.beta0;
  for (const auto& [id, b] : record.betas) {
    auto it = values.find(id);
    if (it != values.end()) v += b * it->second;
  }
  return v;
}

NodeValue synthesize_node(Agent& synthesizer, const PropositionNode& node, const std::vector<ChildView>& children,
                          bool is_root, const RunConfig& config, Accum& acc) {
  ChildValues values;
  std::set<NodeId> ids;
  for (const auto& c : children) {
    values[c.id] = c.p_true;
    ids.insert(c.id);
  }
  if (config.rule == RuleKind::Average) {
    double v = average_apply(values);
    return {v, "Unweighted average of " + std::to_string(children.size()) + " children.", "", AverageRecord{}, false};
  }

  AgentRequest req;
  req.role = AgentRole::Synthesizer;
  req.node_id = node.id.str();
  req.statement = node.statement;
  req.messages = {
      {"system", render_prompt(synthesizer_template(config.rule),
                               {{"abs_intercept_max", format_bound(config.intercept_bound)}})},
      {"user", payload_from(node, children).dump(2)}};

  std::optional<SynthesizerOutput> last_parsed;
  auto validate = [&](const std::string& text) {
    last_parsed.reset();
    SynthesizerOutput out = parse_synthesizer_output(text, config.rule, ids, config.intercept_bound);
    last_parsed = out;
    double v = out.p_true ? *out.p_true : apply_rule(out.record, values, config.intercept_bound);
    return std::make_pair(std::move(out), v);
  };
  try {
    auto [out, v] = call_with_retry(synthesizer, req, validate, config.max_exception_retry, &acc.synthesizer);
    std::string key_factor = key_factor_of(out.record);
    return {v, std::move(out.report), std::move(key_factor), std::move(out.record), false};
  } catch (const AgentExhaustedError& e) {
    ++acc.synthesizer_failures;
    // Coefficients parsed but the combined value left [0,1]: keep them, clamp.
    if (last_parsed && std::holds_alternative<LinearRecord>(last_parsed->record)) {
      double v = std::clamp(unchecked_linear(std::get<LinearRecord>(last_parsed->record), values), 0.0, 1.0);
      acc.flag(node.id);
      std::string key_factor = key_factor_of(last_parsed->record);
      return {v, last_parsed->report + "\n\n[value clamped to [0,1]]", std::move(key_factor), last_parsed->record,
              true};
    }
    if (is_root) throw Error(ErrorCode::RunFailed, "root synthesis failed: " + std::string(e.what()));
    acc.flag(node.id);
    return {config.failure_p_true, std::string("synthesis failed: ") + e.what(), "", VanillaRecord{}, true};
  }
}

void store(PropositionTree& tree, const NodeId& id, NodeValue value) {
  if (value.record)
    tree.set_synthesized(id, value.p_true, std::move(value.report), std::move(*value.record));
  else
    tree.set_grounded(id, value.p_true, std::move(value.report), std::move(value.key_factor));
}

std::vector<ChildView> child_views(const PropositionTree& tree, const PropositionNode& node) {
  std::vector<ChildView> out;
  for (const auto& c : node.children) {
    const auto& child = tree.node(c);
    if (!child.p_true) throw Error(ErrorCode::InvalidInput, "child " + c.str() + " has no value");
    out.push_back({c, child.statement, *child.p_true, child.report.value_or("")});
  }
  return out;
}

// Collects each error once and cancels remaining work.
struct FailureLatch {
  std::mutex mu;
  std::exception_ptr error;
  std::atomic<bool> cancelled{false};

  void capture() {
    std::lock_guard lock(mu);
    if (!error) error = std::current_exception();
    cancelled = true;
  }
  void rethrow() {
    if (error) std::rethrow_exception(error);
  }
};

PropositionTree synthesize_impl(const PropositionTree& tree, const NodeId& top, Agent& grounder, Agent& synthesizer,
                                const RunConfig& config, Accum& acc) {
  if (!tree.contains(top)) throw Error(ErrorCode::NotFound, "no node " + top.str());

  std::vector<NodeId> order;  // DFS pre-order
  std::map<NodeId, NodeId> parent;
  std::vector<NodeId> stack{top};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    order.push_back(id);
    for (const auto& c : tree.node(id).children) {
      if (parent.count(c) || c == top) throw Error(ErrorCode::InvalidInput, "node " + c.str() + " has two parents");
      parent.emplace(c, id);
      stack.push_back(c);
    }
  }

  std::mutex mu;
  std::map<NodeId, NodeValue> results;
  std::map<NodeId, std::size_t> remaining;
  for (const auto& id : order) remaining[id] = tree.node(id).children.size();
  FailureLatch latch;
  TaskPool pool(static_cast<std::size_t>(config.max_concurrent_prove));

  // Defined recursively: finishing the last child schedules the parent.
  std::function<void(const NodeId&, std::optional<NodeValue>)> finish;
  auto schedule_parent = [&](const NodeId& id) {
    pool.submit([&, id] {
      if (latch.cancelled) return;
      try {
        const PropositionNode& node = tree.node(id);
        std::vector<ChildView> kids;
        {
          std::lock_guard lock(mu);
          for (const auto& c : node.children) {
            const auto& child = tree.node(c);
            auto it = results.find(c);
            if (it != results.end())
              kids.push_back({c, child.statement, it->second.p_true, it->second.report});
            else
              kids.push_back({c, child.statement, child.p_true.value_or(0.0), child.report.value_or("")});
          }
        }
        finish(id, synthesize_node(synthesizer, node, kids, id == tree.root(), config, acc));
      } catch (...) {
        latch.capture();
      }
    });
  };
  finish = [&](const NodeId& id, std::optional<NodeValue> value) {
    bool ready = false;
    NodeId up;
    {
      std::lock_guard lock(mu);
      if (value) results[id] = std::move(*value);
      if (id == top) return;
      up = parent.at(id);
      ready = --remaining[up] == 0;
    }
    if (ready) schedule_parent(up);
  };

  for (const auto& id : order) {
    const PropositionNode& node = tree.node(id);
    if (!node.is_leaf()) continue;
    if (node.has_value() && node.p_true) {
      finish(id, std::nullopt);
      continue;
    }
    pool.submit([&, id] {
      if (latch.cancelled) return;
      try {
        finish(id, ground_leaf(grounder, tree.node(id), config, acc));
      } catch (...) {
        latch.capture();
      }
    });
  }
  pool.wait();
  latch.rethrow();

  PropositionTree out = tree;
  for (auto& [id, value] : results) store(out, id, std::move(value));
  return out;
}

PropositionTree graft(PropositionTree tree, const NodeId& host, const PropositionTree& sub) {
  std::vector<NodeId> queue{sub.root()};
  for (std::size_t i = 0; i < queue.size(); ++i) {
    const PropositionNode& node = sub.node(queue[i]);
    if (node.is_leaf()) continue;
    ChildStatements kids;
    for (const auto& c : node.children) {
      kids.emplace_back(c.grafted_under(host).str(), sub.node(c).statement);
      queue.push_back(c);
    }
    tree = add_children(tree, node.id.grafted_under(host), kids, node.causality.value_or(""));
  }
  return tree;
}

PropositionTree fresh_tree(const std::string& statement, const RunConfig& config) {
  PropositionTree tree = create_tree(statement, config.created_at.value_or(utc_timestamp_now()));
  // The concurrency cap never changes results, so it stays out of the
  // document (the run manifest records it) and documents compare byte-equal.
  nlohmann::json snapshot = config.to_json();
  snapshot.erase("concurrency");
  tree.set_config_snapshot(std::move(snapshot));
  return tree;
}

}  // namespace

void RunStats::merge(const RunStats& other) {
  counters.analyzer_calls += other.counters.analyzer_calls;
  counters.grounder_calls += other.counters.grounder_calls;
  counters.synthesizer_calls += other.counters.synthesizer_calls;
  counters.retries += other.counters.retries;
  counters.grounder_failures += other.counters.grounder_failures;
  counters.synthesizer_failures += other.counters.synthesizer_failures;
  timings.analyze_ms += other.timings.analyze_ms;
  timings.synthesize_ms += other.timings.synthesize_ms;
  std::set<NodeId> all(flagged.begin(), flagged.end());
  all.insert(other.flagged.begin(), other.flagged.end());
  flagged.assign(all.begin(), all.end());
}

std::string analyzer_user_message(const PropositionTree& tree, int step) {
  nlohmann::json nodes = nlohmann::json::object();
  for (const auto& [id, node] : tree.nodes()) {
    nlohmann::json kids = nlohmann::json::array();
    for (const auto& c : node.children) kids.push_back(c.str());
    nodes[id.str()] = {{"statement", node.statement}, {"children", std::move(kids)}};
  }
  std::string leaves_text;
  for (const auto& id : leaves(tree)) leaves_text += (leaves_text.empty() ? "" : ", ") + id.str();
  return "Step " + std::to_string(step) + ". Current tree:\n```json\n" + nodes.dump(2) +
         "\n```\nCurrent leaves: " + leaves_text +
         "\nExpand the leaves that need it, or return an empty list if the tree is complete.";
}

std::string grounder_user_message(const PropositionNode& node) {
  return "Proposition " + node.id.str() + ": " + node.statement;
}

nlohmann::json synthesizer_payload(const PropositionTree& tree, const NodeId& node) {
  const PropositionNode& n = tree.node(node);
  return payload_from(n, child_views(tree, n));
}

PropositionTree analyze(const PropositionTree& tree, Agent& analyzer, const RunConfig& config, RunStats* stats) {
  config.validate();
  auto start = Clock::now();
  Accum acc;
  PropositionTree current = tree;
  const PropositionNode& root = tree.node(tree.root());
  for (int step = 1; step <= config.max_steps; ++step) {
    if (leaves(current).size() >= static_cast<std::size_t>(config.max_leaves)) break;
    AgentRequest req;
    req.role = AgentRole::Analyzer;
    req.node_id = root.id.str();
    req.statement = root.statement;
    req.step = step;
    req.messages = {{"system", render_prompt("analyzer", {})}, {"user", analyzer_user_message(current, step)}};
    std::optional<PropositionTree> next;
    try {
      next = call_with_retry(
          analyzer, req,
          [&](const std::string& text) -> std::optional<PropositionTree> {
            AnalyzerOutput out = parse_analyzer_output(text);
            if (out.expansions.empty()) return std::nullopt;
            return apply_expansions(current, out);
          },
          config.max_exception_retry, &acc.analyzer);
    } catch (const AgentExhaustedError& e) {
      throw AnalysisExhaustedError(e, current);
    }
    if (!next) break;
    current = std::move(*next);
  }
  acc.add_to(stats);
  if (stats) stats->timings.analyze_ms += elapsed_ms(start);
  return current;
}

PropositionTree synthesize(const PropositionTree& tree, const NodeId& node, Agent& grounder, Agent& synthesizer,
                           const RunConfig& config, RunStats* stats) {
  config.validate();
  auto start = Clock::now();
  Accum acc;
  PropositionTree out = synthesize_impl(tree, node, grounder, synthesizer, config, acc);
  acc.add_to(stats);
  if (stats) stats->timings.synthesize_ms += elapsed_ms(start);
  return out;
}

RunResult run(const std::string& query, const Agents& agents, const RunConfig& config) {
  config.validate();
  require_agents(agents, true);
  RunStats stats;
  PropositionTree tree = analyze(fresh_tree(query, config), *agents.analyzer, config, &stats);
  tree = synthesize(tree, tree.root(), *agents.grounder, *agents.synthesizer, config, &stats);
  return {std::move(tree), std::move(stats)};
}

RunResult run_recursive(const std::string& query, const Agents& agents, const RunConfig& config) {
  config.validate();
  require_agents(agents, true);
  if (config.recursion_depth == 1) return run(query, agents, config);

  RunStats stats;
  PropositionTree tree = analyze(fresh_tree(query, config), *agents.analyzer, config, &stats);
  std::vector<NodeId> frontier = leaves(tree);
  std::size_t leaf_count = frontier.size();
  std::set<NodeId> failed;

  for (int level = 2; level <= config.recursion_depth && !frontier.empty(); ++level) {
    std::vector<std::optional<PropositionTree>> subs(frontier.size());
    std::vector<RunStats> sub_stats(frontier.size());
    auto expand = [&](std::size_t i) {
      try {
        subs[i] = analyze(fresh_tree(tree.node(frontier[i]).statement, config), *agents.analyzer, config,
                          &sub_stats[i]);
      } catch (const Error&) {
        subs[i].reset();
      }
    };

    std::vector<bool> attempted(frontier.size(), false);
    if (config.recursion_mode == RecursionMode::Parallel) {
      TaskPool pool(static_cast<std::size_t>(config.max_concurrent_prove));
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        attempted[i] = true;
        pool.submit([&, i] { expand(i); });
      }
      pool.wait();
    }

    std::vector<NodeId> next;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      if (config.recursion_mode == RecursionMode::Sequential) {
        if (config.recursion_leaf_budget && leaf_count >= static_cast<std::size_t>(*config.recursion_leaf_budget))
          break;
        attempted[i] = true;
        expand(i);
      }
      if (!attempted[i]) continue;
      stats.merge(sub_stats[i]);
      if (!subs[i]) {
        failed.insert(frontier[i]);
        continue;
      }
      if (subs[i]->size() == 1) continue;
      tree = graft(std::move(tree), frontier[i], *subs[i]);
      auto sub_leaves = leaves(*subs[i]);
      leaf_count += sub_leaves.size() - 1;
      for (const auto& l : sub_leaves) next.push_back(l.grafted_under(frontier[i]));
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }

  for (const auto& id : failed) {
    tree.set_grounded(id, config.failure_p_true, "sub-analysis failed", "");
    stats.flagged.push_back(id);
    ++stats.counters.grounder_failures;
  }
  std::sort(stats.flagged.begin(), stats.flagged.end());
  tree = synthesize(tree, tree.root(), *agents.grounder, *agents.synthesizer, config, &stats);
  return {std::move(tree), std::move(stats)};
}

ResynthesisResult resynthesize(const PropositionTree& tree, const std::vector<NodeEdit>& edits, Agent& synthesizer,
                               const RunConfig& config, Agent* grounder) {
  config.validate();
  auto start = Clock::now();
  PropositionTree work = tree;
  std::set<NodeId> edited;
  std::set<NodeId> reground;

  for (const auto& e : edits) {
    PropositionNode& node = work.node(e.id);
    if (e.p_true && !(*e.p_true >= 0.0 && *e.p_true <= 1.0))
      throw Error(ErrorCode::InvalidInput, "p_true for " + e.id.str() + " must lie in [0,1]");
    if (e.statement) {
      if (e.statement->empty()) throw Error(ErrorCode::InvalidInput, "statement for " + e.id.str() + " is empty");
      if (*e.statement != node.statement) {
        node.statement = *e.statement;
        edited.insert(e.id);
        if (node.is_leaf() && grounder && !e.p_true) reground.insert(e.id);
      }
    }
    if (e.p_true && node.p_true != e.p_true) {
      node.p_true = *e.p_true;
      if (node.is_leaf()) node.status = NodeStatus::Grounded;
      if (!node.report) node.report = "";
      edited.insert(e.id);
    }
  }
  for (const auto& id : leaves(work)) {
    if (work.node(id).p_true) continue;
    if (!grounder) throw Error(ErrorCode::InvalidInput, "leaf " + id.str() + " has no value and no grounder was given");
    reground.insert(id);
    edited.insert(id);
  }

  Accum acc;
  if (!reground.empty()) {
    std::map<NodeId, NodeValue> grounded;
    std::mutex mu;
    FailureLatch latch;
    {
      TaskPool pool(static_cast<std::size_t>(config.max_concurrent_prove));
      for (const auto& id : reground)
        pool.submit([&, id] {
          try {
            NodeValue v = ground_leaf(*grounder, work.node(id), config, acc);
            std::lock_guard lock(mu);
            grounded[id] = std::move(v);
          } catch (...) {
            latch.capture();
          }
        });
      pool.wait();
    }
    latch.rethrow();
    for (auto& [id, v] : grounded) store(work, id, std::move(v));
  }

  std::set<NodeId> dirty_set;
  for (const auto& id : edited)
    for (const auto& a : work.ancestors_of(id)) dirty_set.insert(a);
  for (const auto& id : internal_nodes(work))
    if (!work.node(id).p_true) {
      dirty_set.insert(id);
      for (const auto& a : work.ancestors_of(id)) dirty_set.insert(a);
    }

  std::map<std::size_t, std::vector<NodeId>, std::greater<>> by_depth;
  for (const auto& id : dirty_set) by_depth[work.depth_of(id)].push_back(id);

  ResynthesisResult result{work, {edited.begin(), edited.end()}, {}, {}, {}};
  for (auto& [depth, ids] : by_depth) {
    std::map<NodeId, NodeValue> level;
    std::mutex mu;
    FailureLatch latch;
    {
      TaskPool pool(static_cast<std::size_t>(config.max_concurrent_prove));
      for (const auto& id : ids)
        pool.submit([&, id] {
          if (latch.cancelled) return;
          try {
            const PropositionNode& node = work.node(id);
            NodeValue v = synthesize_node(synthesizer, node, child_views(work, node), id == work.root(), config, acc);
            std::lock_guard lock(mu);
            level[id] = std::move(v);
          } catch (...) {
            latch.capture();
          }
        });
      pool.wait();
    }
    latch.rethrow();
    for (auto& [id, v] : level) store(work, id, std::move(v));
    result.dirty.insert(result.dirty.end(), ids.begin(), ids.end());
  }

  for (const auto& [id, node] : work.nodes()) {
    std::optional<double> old;
    if (tree.contains(id)) old = tree.node(id).p_true;
    if (node.p_true && old != node.p_true) result.delta.push_back({id, old, *node.p_true});
  }
  result.tree = std::move(work);
  acc.add_to(&result.stats);
  result.stats.timings.synthesize_ms = elapsed_ms(start);
  return result;
}

double binary_complement(double p_option1) {
  if (!(p_option1 >= 0.0 && p_option1 <= 1.0)) throw Error(ErrorCode::InvalidInput, "probability must lie in [0,1]");
  return 1.0 - p_option1;
}

nlohmann::json run_manifest(const std::string& query, const RunConfig& config, const nlohmann::json& agents,
                            const std::string& tree_ref, const RunStats& stats) {
  nlohmann::json flagged = nlohmann::json::array();
  for (const auto& id : stats.flagged) flagged.push_back(id.str());
  const auto& c = stats.counters;
  return {
      {"query", query},
      {"config",
       {{"L_max", config.max_leaves},
        {"T_max", config.max_steps},
        {"rule", to_string(config.rule)},
        {"concurrency", config.max_concurrent_prove},
        {"n", config.recursion_depth},
        {"seed", config.seed},
        {"decision_threshold",
         config.decision_threshold ? nlohmann::json(*config.decision_threshold) : nlohmann::json(nullptr)}}},
      {"agents", agents.is_null() ? nlohmann::json::object() : agents},
      {"tree_ref", tree_ref},
      {"timings", {{"analyze_ms", stats.timings.analyze_ms}, {"synthesize_ms", stats.timings.synthesize_ms}}},
      {"counters",
       {{"agent_calls", c.agent_calls()},
        {"analyzer_calls", c.analyzer_calls},
        {"grounder_calls", c.grounder_calls},
        {"synthesizer_calls", c.synthesizer_calls},
        {"retries", c.retries},
        {"grounder_failures", c.grounder_failures},
        {"synthesizer_failures", c.synthesizer_failures}}},
      {"flagged", std::move(flagged)},
  };
}

}  // namespace spr
