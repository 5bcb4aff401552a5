// spr: command-line front end for runs, what-if edits, simulations,
// evaluation, Bayes-net export and the HTTP service.
//
// Exit codes: 0 ok, 2 validation or usage, 3 agent failure, 4 I/O.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spr/agents/factory.hpp"
#include "spr/core/document.hpp"
#include "spr/error.hpp"
#include "spr/eval/metrics.hpp"
#include "spr/orchestrator/orchestrator.hpp"
#include "spr/service/http.hpp"
#include "spr/service/service.hpp"
#include "spr/service/store.hpp"
#include "spr/simlab/experiments.hpp"
#include "spr/synthesis/bayes_net.hpp"
#include "spr/synthesis/rules.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spr;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kAgentFailure = 3;
constexpr int kIo = 4;

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::AgentExhausted:
    case ErrorCode::Transport:
    case ErrorCode::RunFailed:
    case ErrorCode::MissingPayload:
    case ErrorCode::PayloadSyntax: return kAgentFailure;
    case ErrorCode::Io:
    case ErrorCode::IntegrityError: return kIo;
    default: return kValidation;
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::InvalidConfig, path.string() + " is not valid JSON");
  return doc;
}

// Writes to `out`, or stdout when empty.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text)) throw Error(ErrorCode::Io, "cannot write " + out);
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

// Job files: {"query": text, "config": {RunConfig keys}, "agents": {role: spec}}.
struct Job {
  json doc;
  fs::path base_dir;
};

Job load_job(const Globals& g) {
  if (g.config.empty()) throw Error(ErrorCode::InvalidConfig, "--config is required");
  Job job{read_json(g.config), fs::path(g.config).parent_path()};
  if (!job.doc.is_object()) throw Error(ErrorCode::InvalidConfig, "job file must be an object");
  return job;
}

RunConfig job_config(const Job& job, const Globals& g) {
  RunConfig c = RunConfig::from_json(job.doc.value("config", json::object()));
  if (g.seed) c.seed = *g.seed;
  return c;
}

std::unique_ptr<Agent> job_agent(const Job& job, const char* role, AgentRole kind) {
  if (!job.doc.contains("agents") || !job.doc["agents"].contains(role))
    throw Error(ErrorCode::InvalidConfig, std::string("job file has no ") + role + " agent");
  return make_agent(job.doc["agents"][role], kind, job.base_dir);
}

std::vector<double> split_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidInput, "not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

// Simulation spec files: {"synthetic": {...}, "noise": {...}, "rule": name,
// "runs": R, "workers": W, "seed": s, "family": M, "rules": [...],
// "kinds": [...], "alphas": [...], "branching": K, "depths": [...],
// "latency_ms": ms}. Flags override file values.
json load_sim_spec(const Globals& g) {
  if (g.config.empty()) return json::object();
  json doc = read_json(g.config);
  if (!doc.is_object()) throw Error(ErrorCode::InvalidSpec, "simulation spec must be an object");
  return doc;
}

std::uint64_t sim_seed(const json& spec, const Globals& g) {
  return g.seed ? *g.seed : spec.value("seed", std::uint64_t{0});
}

HttpServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured probabilistic reasoning engine"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Job, simulation or service file");
  app.add_option("--seed", g.seed, "Overrides the configured seed");
  app.add_option("--out", g.out, "Output file (default stdout)");

  // run
  auto* run_cmd = app.add_subcommand("run", "Decompose, ground and synthesize a query");
  std::string query, store_dir, manifest_out;
  run_cmd->add_option("--query", query, "Overrides the job's query");
  run_cmd->add_option("--store", store_dir, "Also store the tree and manifest here");
  run_cmd->add_option("--manifest", manifest_out, "Write the run manifest to this file");

  // resynthesize
  auto* resyn_cmd = app.add_subcommand("resynthesize", "Apply edits to a tree and recompute its ancestors");
  std::string tree_in;
  std::vector<std::string> value_edits, statement_edits;
  resyn_cmd->add_option("--tree", tree_in, "Tree document")->required()->check(CLI::ExistingFile);
  resyn_cmd->add_option("--set", value_edits, "ID=P edits");
  resyn_cmd->add_option("--statement", statement_edits, "ID=TEXT edits");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Synthetic-tree experiments");
  sim_cmd->require_subcommand(1);
  std::optional<long> runs;
  std::optional<int> workers;
  std::optional<std::string> rule_name;
  auto* bv_cmd = sim_cmd->add_subcommand("bias-variance", "Monte Carlo bias, variance and MSE");
  bv_cmd->add_option("--runs", runs);
  bv_cmd->add_option("--workers", workers);
  bv_cmd->add_option("--rule", rule_name);
  auto* rob_cmd = sim_cmd->add_subcommand("robustness", "MSE over rules, noise kinds and levels");
  rob_cmd->add_option("--runs", runs);
  rob_cmd->add_option("--workers", workers);
  auto* scal_cmd = sim_cmd->add_subcommand("scalability", "Wall time and calls per recursion depth");
  std::optional<int> branching, latency_ms;
  std::optional<std::string> depths;
  scal_cmd->add_option("--branching", branching);
  scal_cmd->add_option("--depths", depths, "Comma-separated, e.g. 1,2,3");
  scal_cmd->add_option("--latency-ms", latency_ms);
  scal_cmd->add_option("--workers", workers);
  auto* grid_cmd = sim_cmd->add_subcommand("sensitivity-grid", "Value and partials over a two-input lattice");
  std::string grid_tree, grid_node = "P0", grid_betas = "0.5,0.5";
  double grid_beta0 = 0.0;
  int resolution = 21;
  grid_cmd->add_option("--tree", grid_tree, "Take the record of --node from this tree");
  grid_cmd->add_option("--node", grid_node);
  grid_cmd->add_option("--beta0", grid_beta0, "Linear record intercept when no tree is given");
  grid_cmd->add_option("--betas", grid_betas, "Two linear coefficients when no tree is given");
  grid_cmd->add_option("--resolution", resolution)->check(CLI::Range(2, 1001));

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against event tasks");
  std::string events_in, predictions_in, calibrate_in, rows_out;
  std::optional<double> threshold;
  eval_cmd->add_option("--events", events_in)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--predictions", predictions_in)->required()->check(CLI::ExistingFile);
  auto* thr = eval_cmd->add_option("--threshold", threshold, "Binary decision threshold");
  eval_cmd->add_option("--calibrate", calibrate_in, "Fit the threshold on labelled probabilities")
      ->check(CLI::ExistingFile)
      ->excludes(thr);
  eval_cmd->add_option("--rows", rows_out, "Per-event CSV");

  // export-bayes
  auto* bayes_cmd = app.add_subcommand("export-bayes", "Export a linear node as a Bayesian-network CPD");
  std::string bayes_tree, bayes_node = "P0", normalization = "none";
  bool noisy_or = false;
  bayes_cmd->add_option("--tree", bayes_tree)->required()->check(CLI::ExistingFile);
  bayes_cmd->add_option("--node", bayes_node);
  bayes_cmd->add_option("--normalization", normalization)->check(CLI::IsMember({"none", "minmax", "softmax"}));
  bayes_cmd->add_flag("--noisy-or", noisy_or, "Independent-cause reading of the coefficients");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  std::optional<int> port;
  std::optional<std::string> host;
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--host", host);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*run_cmd) {
      Job job = load_job(g);
      RunConfig config = job_config(job, g);
      std::string q = query.empty() ? job.doc.value("query", "") : query;
      if (q.empty()) throw Error(ErrorCode::InvalidConfig, "no query given");
      auto analyzer = job_agent(job, "analyzer", AgentRole::Analyzer);
      auto grounder = job_agent(job, "grounder", AgentRole::Grounder);
      auto synthesizer = job_agent(job, "synthesizer", AgentRole::Synthesizer);
      RunResult result = run_recursive(q, {analyzer.get(), grounder.get(), synthesizer.get()}, config);
      std::string text = serialize_tree(result.tree);
      std::string ref = "sha256:" + sha256_hex(text);
      if (!store_dir.empty()) {
        Store store(store_dir);
        ref = store.put_text(text);
      }
      json manifest = run_manifest(q, config, job.doc.value("agents", json()), ref, result.stats);
      if (!store_dir.empty()) Store(store_dir).put(manifest);
      if (!manifest_out.empty()) emit(manifest_out, canonical_dump(manifest));
      emit(g.out, text);
      const auto& root = result.tree.node(result.tree.root());
      std::cerr << "P0 = " << (root.p_true ? std::to_string(*root.p_true) : "none") << " (" << result.tree.size()
                << " nodes, " << ref << ")\n";
      return kOk;
    }

    if (*resyn_cmd) {
      Job job = load_job(g);
      RunConfig config = job_config(job, g);
      PropositionTree tree = deserialize_tree(read_file(tree_in));
      std::map<std::string, NodeEdit> edits;
      auto edit_for = [&](const std::string& id) -> NodeEdit& {
        auto it = edits.find(id);
        if (it == edits.end()) it = edits.emplace(id, NodeEdit{NodeId::parse(id), std::nullopt, std::nullopt}).first;
        return it->second;
      };
      for (const auto& e : value_edits) {
        auto eq = e.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidInput, "--set expects ID=P, got " + e);
        auto v = split_doubles(e.substr(eq + 1));
        if (v.size() != 1) throw Error(ErrorCode::InvalidInput, "--set expects one value, got " + e);
        edit_for(e.substr(0, eq)).p_true = v[0];
      }
      for (const auto& e : statement_edits) {
        auto eq = e.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidInput, "--statement expects ID=TEXT, got " + e);
        edit_for(e.substr(0, eq)).statement = e.substr(eq + 1);
      }
      std::vector<NodeEdit> list;
      for (auto& [_, e] : edits) list.push_back(e);
      auto synthesizer = job_agent(job, "synthesizer", AgentRole::Synthesizer);
      std::unique_ptr<Agent> grounder;
      if (job.doc.contains("agents") && job.doc["agents"].contains("grounder"))
        grounder = job_agent(job, "grounder", AgentRole::Grounder);
      ResynthesisResult r = resynthesize(tree, list, *synthesizer, config, grounder.get());
      emit(g.out, serialize_tree(r.tree));
      for (const auto& d : r.delta)
        std::cerr << d.id.str() << ": " << (d.old_p_true ? std::to_string(*d.old_p_true) : "none") << " -> " << d.new_p_true << "\n";
      return kOk;
    }

    if (*bv_cmd) {
      json spec = load_sim_spec(g);
      SyntheticTreeSpec tree = SyntheticTreeSpec::from_json(spec.value("synthetic", json::object()));
      NoiseModel noise = NoiseModel::from_json(spec.value("noise", json::object()));
      SimRule rule = sim_rule_from_string(rule_name.value_or(spec.value("rule", "linear")));
      long r = runs.value_or(spec.value("runs", 10000L));
      int w = workers.value_or(spec.value("workers", 1));
      emit(g.out, emit_plot_data(monte_carlo_bias_variance(tree, noise, rule, r, sim_seed(spec, g), w)));
      return kOk;
    }

    if (*rob_cmd) {
      json spec = load_sim_spec(g);
      SyntheticTreeSpec base = SyntheticTreeSpec::from_json(spec.value("synthetic", json::object()));
      int members = spec.value("family", 1);
      if (members < 1) throw Error(ErrorCode::InvalidSpec, "family must be positive");
      std::vector<SyntheticTreeSpec> family;
      for (int m = 0; m < members; ++m) {
        SyntheticTreeSpec s = base;
        s.seed = base.seed + static_cast<std::uint64_t>(m);
        family.push_back(s);
      }
      std::vector<SimRule> rules;
      for (const auto& r : spec.value("rules", std::vector<std::string>{"linear", "logic_and", "logic_or"}))
        rules.push_back(sim_rule_from_string(r));
      std::vector<NoiseKind> kinds;
      for (const auto& k : spec.value("kinds", std::vector<std::string>{"normal", "uncertain", "reverse"}))
        kinds.push_back(noise_kind_from_string(k));
      auto alphas = spec.value("alphas", std::vector<double>{0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
      long r = runs.value_or(spec.value("runs", 1000L));
      int w = workers.value_or(spec.value("workers", 1));
      emit(g.out, emit_plot_data(robustness_sweep(family, rules, alphas, kinds, r, sim_seed(spec, g), w)));
      return kOk;
    }

    if (*scal_cmd) {
      json spec = load_sim_spec(g);
      std::vector<int> ds;
      if (depths) {
        for (double d : split_doubles(*depths)) ds.push_back(static_cast<int>(d));
      } else {
        ds = spec.value("depths", std::vector<int>{1, 2, 3});
      }
      int k = branching.value_or(spec.value("branching", 3));
      int lat = latency_ms.value_or(spec.value("latency_ms", 10));
      if (lat < 0) throw Error(ErrorCode::InvalidSpec, "latency must be non-negative");
      int w = workers.value_or(spec.value("workers", 64));
      emit(g.out, emit_plot_data(scalability_benchmark(k, ds, std::chrono::milliseconds(lat), w, sim_seed(spec, g))));
      return kOk;
    }

    if (*grid_cmd) {
      SynthesisRecord record;
      std::vector<NodeId> children;
      if (!grid_tree.empty()) {
        PropositionTree tree = deserialize_tree(read_file(grid_tree));
        const auto& node = tree.node(NodeId::parse(grid_node));
        if (!node.synthesis) throw Error(ErrorCode::InvalidInput, grid_node + " has no synthesis record");
        record = *node.synthesis;
        children = node.children;
      } else {
        auto b = split_doubles(grid_betas);
        if (b.size() != 2) throw Error(ErrorCode::InvalidInput, "--betas needs two values");
        LinearRecord lin;
        lin.beta0 = grid_beta0;
        children = {NodeId::parse("P1"), NodeId::parse("P2")};
        lin.betas = {{children[0], b[0]}, {children[1], b[1]}};
        record = lin;
      }
      emit(g.out, emit_plot_data(sensitivity_grid(record, children, resolution)));
      return kOk;
    }

    if (*eval_cmd) {
      auto events = parse_events(read_file(events_in));
      auto predictions = parse_predictions(read_file(predictions_in));
      for (const auto& l : events.lint) std::cerr << events_in << ":" << l.line << ": " << l.message << "\n";
      for (const auto& l : predictions.lint) std::cerr << predictions_in << ":" << l.line << ": " << l.message << "\n";
      std::optional<double> delta = threshold;
      if (!calibrate_in.empty()) {
        auto validation = parse_calibration(read_file(calibrate_in));
        for (const auto& l : validation.lint) std::cerr << calibrate_in << ":" << l.line << ": " << l.message << "\n";
        Calibration c = calibrate_threshold(validation.records);
        delta = c.delta;
        std::cerr << "calibrated threshold " << c.delta << " (validation accuracy " << c.accuracy << ")\n";
      }
      std::vector<LintIssue> lint;
      MetricsReport report = evaluate(events.records, predictions.records, delta, &lint);
      for (const auto& l : lint) std::cerr << predictions_in << ":" << l.line << ": " << l.message << "\n";
      json doc = report.to_json();
      doc["table_row"] = report.table_row();
      emit(g.out, canonical_dump(doc));
      if (!rows_out.empty()) emit(rows_out, rows_csv(report));
      return kOk;
    }

    if (*bayes_cmd) {
      PropositionTree tree = deserialize_tree(read_file(bayes_tree));
      const auto& node = tree.node(NodeId::parse(bayes_node));
      if (!node.synthesis || !std::holds_alternative<LinearRecord>(*node.synthesis))
        throw Error(ErrorCode::Unsupported, bayes_node + " does not carry a linear record");
      ChildValues priors;
      for (const auto& c : node.children) {
        const auto& child = tree.node(c);
        if (!child.p_true) throw Error(ErrorCode::InvalidInput, c.str() + " has no value");
        priors[c] = *child.p_true;
      }
      const auto& lin = std::get<LinearRecord>(*node.synthesis);
      BayesNetExport net = noisy_or ? to_noisy_or_bayes_net(lin, priors)
                                    : to_bayes_net(lin, priors, normalization_from_string(normalization));
      json doc = bayes_net_to_json(net);
      doc["node"] = bayes_node;
      doc["probability"] = wmc_probability(net);
      emit(g.out, canonical_dump(doc));
      return kOk;
    }

    if (*serve_cmd) {
      ServiceConfig config = g.config.empty() ? ServiceConfig{} : ServiceConfig::from_file(g.config);
      config = config.with_env_overrides();
      if (port) config.port = *port;
      if (host) config.host = *host;
      Service service(config);
      HttpServer server(service);
      int bound = server.bind(config.host, config.port);
      std::cerr << "listening on " << config.host << ":" << bound << " (store " << config.store.string() << ")\n";
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      server.listen();
      g_server = nullptr;
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}
