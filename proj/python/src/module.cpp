// Python bindings. Structured values cross the boundary as JSON text; the
// spr_engine package converts them to and from Python objects.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "spr/agents/factory.hpp"
#include "spr/core/document.hpp"
#include "spr/error.hpp"
#include "spr/eval/metrics.hpp"
#include "spr/orchestrator/orchestrator.hpp"
#include "spr/simlab/experiments.hpp"
#include "spr/synthesis/bayes_net.hpp"
#include "spr/synthesis/beta_path.hpp"
#include "spr/synthesis/formula.hpp"
#include "spr/synthesis/rules.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace spr;

namespace {

ChildValues child_values(const json& doc) {
  ChildValues out;
  for (const auto& [k, v] : doc.items()) out[NodeId::parse(k)] = v.get<double>();
  return out;
}

struct JobAgents {
  std::unique_ptr<Agent> analyzer, grounder, synthesizer;
};

JobAgents job_agents(const json& job, const std::string& base_dir, bool need_analyzer) {
  const json& a = job.at("agents");
  JobAgents out;
  if (need_analyzer) out.analyzer = make_agent(a.at("analyzer"), AgentRole::Analyzer, base_dir);
  if (a.contains("grounder")) out.grounder = make_agent(a.at("grounder"), AgentRole::Grounder, base_dir);
  out.synthesizer = make_agent(a.at("synthesizer"), AgentRole::Synthesizer, base_dir);
  return out;
}

std::string run_job(const std::string& job_text, const std::string& base_dir) {
  json job = json::parse(job_text);
  RunConfig config = RunConfig::from_json(job.value("config", json::object()));
  auto agents = job_agents(job, base_dir, true);
  if (!agents.grounder) throw Error(ErrorCode::InvalidConfig, "job has no grounder agent");
  std::string query = job.at("query").get<std::string>();
  RunResult r = run_recursive(query, {agents.analyzer.get(), agents.grounder.get(), agents.synthesizer.get()}, config);
  std::string text = serialize_tree(r.tree);
  json manifest = run_manifest(query, config, job.at("agents"), "", r.stats);
  return json{{"tree", text}, {"manifest", manifest}}.dump();
}

std::string resynthesize_tree(const std::string& tree_text, const std::string& edits_text,
                              const std::string& job_text, const std::string& base_dir) {
  json job = json::parse(job_text);
  RunConfig config = RunConfig::from_json(job.value("config", json::object()));
  auto agents = job_agents(job, base_dir, false);
  std::vector<NodeEdit> edits;
  for (const auto& e : json::parse(edits_text)) {
    NodeEdit edit{NodeId::parse(e.at("id").get<std::string>()), std::nullopt, std::nullopt};
    if (e.contains("p_true")) edit.p_true = e["p_true"].get<double>();
    if (e.contains("statement")) edit.statement = e["statement"].get<std::string>();
    edits.push_back(edit);
  }
  auto r = resynthesize(deserialize_tree(tree_text), edits, *agents.synthesizer, config, agents.grounder.get());
  json delta = json::array(), dirty = json::array();
  for (const auto& d : r.delta)
    delta.push_back({{"id", d.id.str()},
                     {"old", d.old_p_true ? json(*d.old_p_true) : json(nullptr)},
                     {"new", d.new_p_true}});
  for (const auto& id : r.dirty) dirty.push_back(id.str());
  return json{{"tree", serialize_tree(r.tree)}, {"delta", delta}, {"dirty", dirty}}.dump();
}

std::string beta_paths(const std::string& tree_text) {
  auto summary = compute_beta_paths(deserialize_tree(tree_text));
  json weights = json::object();
  for (const auto& [leaf, w] : summary.leaf_weights) weights[leaf.str()] = w;
  return json{{"intercept", summary.aggregated_intercept}, {"weights", weights}}.dump();
}

std::string report_json(const BiasVarianceReport& r) {
  return json{{"runs", r.runs},         {"truth", r.truth},       {"mean", r.mean},
              {"bias", r.bias},         {"bias_squared", r.bias_squared}, {"variance", r.variance},
              {"mse", r.mse},           {"residual", r.residual}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_spr, m) {
  m.doc() = "Structured probabilistic reasoning engine";
  static py::exception<Error> error(m, "SprError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  const auto release = py::call_guard<py::gil_scoped_release>();
  m.def("run", &run_job, py::arg("job"), py::arg("base_dir") = "", release);
  m.def("resynthesize", &resynthesize_tree, py::arg("tree"), py::arg("edits"), py::arg("job"),
        py::arg("base_dir") = "", release);
  m.def("beta_paths", &beta_paths, py::arg("tree"));
  m.def(
      "apply_rule",
      [](const std::string& record, const std::string& values) {
        return apply_rule(record_from_json(json::parse(record)), child_values(json::parse(values)));
      },
      py::arg("record"), py::arg("values"));
  m.def(
      "sensitivity",
      [](const std::string& record, const std::string& values) {
        json out = json::object();
        for (const auto& [id, d] : sensitivity(record_from_json(json::parse(record)), child_values(json::parse(values))))
          out[id.str()] = d;
        return out.dump();
      },
      py::arg("record"), py::arg("values"));
  m.def(
      "wmc_probability",
      [](const std::string& record, const std::string& priors, const std::string& normalization) {
        auto rec = record_from_json(json::parse(record));
        if (!std::holds_alternative<LinearRecord>(rec)) throw Error(ErrorCode::Unsupported, "WMC needs a linear record");
        return wmc_probability(to_bayes_net(std::get<LinearRecord>(rec), child_values(json::parse(priors)),
                                            normalization_from_string(normalization)));
      },
      py::arg("record"), py::arg("priors"), py::arg("normalization") = "none");
  m.def(
      "eval_formula",
      [](const std::string& formula, const std::map<std::string, double>& values) {
        return eval_formula(parse_formula(formula), Assignment(values.begin(), values.end()));
      },
      py::arg("formula"), py::arg("values"));
  m.def(
      "bias_variance",
      [](const std::string& spec, const std::string& noise, const std::string& rule, long runs, std::uint64_t seed,
         int workers) {
        return report_json(monte_carlo_bias_variance(SyntheticTreeSpec::from_json(json::parse(spec)),
                                                     NoiseModel::from_json(json::parse(noise)),
                                                     sim_rule_from_string(rule), runs, seed, workers));
      },
      py::arg("spec"), py::arg("noise"), py::arg("rule") = "linear", py::arg("runs") = 10000, py::arg("seed") = 0,
      py::arg("workers") = 1, release);
  m.def(
      "evaluate",
      [](const std::string& events, const std::string& predictions, std::optional<double> threshold) {
        auto tasks = parse_events(events);
        auto preds = parse_predictions(predictions);
        json doc = evaluate(tasks.records, preds.records, threshold).to_json();
        json lint = json::array();
        for (const auto& l : tasks.lint) lint.push_back({{"source", "events"}, {"line", l.line}, {"message", l.message}});
        for (const auto& l : preds.lint)
          lint.push_back({{"source", "predictions"}, {"line", l.line}, {"message", l.message}});
        doc["lint"] = lint;
        return doc.dump();
      },
      py::arg("events"), py::arg("predictions"), py::arg("threshold") = std::nullopt);
  m.def(
      "calibrate_threshold",
      [](const std::vector<std::pair<double, bool>>& validation) {
        Calibration c = calibrate_threshold(validation);
        return std::make_pair(c.delta, c.accuracy);
      },
      py::arg("validation"));
  m.def("binary_complement", &binary_complement, py::arg("p"));
  m.def("canonical_dump", [](const std::string& text) { return canonical_dump(json::parse(text)); }, py::arg("doc"));
}
