#include "spr/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "spr/error.hpp"

namespace spr {

namespace {

Error schema(const std::string& message) { return Error(ErrorCode::SchemaMismatch, message); }

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// Sum-normalized probabilities in option order; uniform when all are zero.
std::vector<double> normalized(const EventTask& task, const Prediction& p, bool* degenerate) {
  if (p.p_true.size() != task.options.size())
    throw schema("prediction for " + task.id + " covers " + std::to_string(p.p_true.size()) + " options, task has " +
                 std::to_string(task.options.size()));
  std::vector<double> raw;
  double sum = 0.0;
  for (const auto& o : task.options) {
    auto it = p.p_true.find(o.id);
    if (it == p.p_true.end()) throw schema("prediction for " + task.id + " lacks option " + o.id);
    if (!(it->second >= 0.0 && it->second <= 1.0))
      throw Error(ErrorCode::InvalidInput, "p_true for " + task.id + "/" + o.id + " must lie in [0,1]");
    raw.push_back(it->second);
    sum += it->second;
  }
  if (degenerate) *degenerate = sum == 0.0;
  for (auto& x : raw) x = sum == 0.0 ? 1.0 / static_cast<double>(raw.size()) : x / sum;
  return raw;
}

template <typename T, typename F>
Ingested<T> parse_lines(std::string_view text, F&& parse) {
  Ingested<T> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.records.push_back(parse(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      out.lint.push_back({line_no, e.what()});
    } catch (const Error& e) {
      out.lint.push_back({line_no, e.what()});
    }
  }
  return out;
}

}  // namespace

void EventTask::validate() const {
  if (id.empty()) throw schema("event needs an id");
  if (options.size() < 2) throw schema("event " + id + " needs at least two options");
  std::set<std::string> ids;
  for (const auto& o : options)
    if (!ids.insert(o.id).second) throw schema("event " + id + " repeats option " + o.id);
  bool distinct = std::any_of(options.begin(), options.end(),
                              [&](const EventOption& o) { return o.dollar_value != options.front().dollar_value; });
  if (!distinct) throw schema("event " + id + " has no distinguishable option values");
}

EventTask EventTask::from_json(const nlohmann::json& doc) {
  EventTask t;
  t.id = doc.at("id").get<std::string>();
  t.description = doc.value("description", std::string());
  t.current_date = doc.value("current_date", std::string());
  for (const auto& o : doc.at("options"))
    t.options.push_back({o.at("id").get<std::string>(), o.value("statement", std::string()),
                         o.at("dollar_value").get<double>()});
  t.validate();
  return t;
}

nlohmann::json EventTask::to_json() const {
  nlohmann::json opts = nlohmann::json::array();
  for (const auto& o : options) opts.push_back({{"id", o.id}, {"statement", o.statement}, {"dollar_value", o.dollar_value}});
  return {{"id", id}, {"description", description}, {"current_date", current_date}, {"options", opts}};
}

Prediction Prediction::from_json(const nlohmann::json& doc) {
  Prediction p;
  p.task_id = doc.at("id").get<std::string>();
  if (doc.contains("run") && !doc["run"].is_null()) p.run = doc["run"].get<int>();
  p.p_true = doc.at("p_true").get<std::map<std::string, double>>();
  if (doc.contains("metadata")) p.metadata = doc["metadata"];
  return p;
}

nlohmann::json Prediction::to_json() const {
  nlohmann::json doc{{"id", task_id}, {"p_true", p_true}};
  if (run) doc["run"] = *run;
  if (!metadata.is_null()) doc["metadata"] = metadata;
  return doc;
}

Ingested<EventTask> parse_events(std::string_view text) {
  return parse_lines<EventTask>(text, [](const nlohmann::json& j) { return EventTask::from_json(j); });
}

Ingested<Prediction> parse_predictions(std::string_view text) {
  return parse_lines<Prediction>(text, [](const nlohmann::json& j) { return Prediction::from_json(j); });
}

Ingested<std::pair<double, bool>> parse_calibration(std::string_view text) {
  return parse_lines<std::pair<double, bool>>(text, [](const nlohmann::json& j) {
    double p = j.at("p_true").get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidInput, "p_true must lie in [0,1]");
    return std::make_pair(p, j.at("label").get<bool>());
  });
}

double brier(const EventTask& task, const Prediction& prediction) {
  task.validate();
  auto p = normalized(task, prediction, nullptr);
  double best = task.options.front().dollar_value;
  for (const auto& o : task.options) best = std::max(best, o.dollar_value);
  double co_best = 0;
  for (const auto& o : task.options) co_best += o.dollar_value == best;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double y = task.options[i].dollar_value == best ? 1.0 / co_best : 0.0;
    sum += (p[i] - y) * (p[i] - y);
  }
  return sum / static_cast<double>(p.size());
}

EventScore score_event(const EventTask& task, const Prediction& prediction, std::optional<double> threshold) {
  task.validate();
  EventScore s;
  s.task_id = task.id;
  s.run = prediction.run;
  auto p = normalized(task, prediction, &s.degenerate);

  double lo = task.options.front().dollar_value, hi = lo;
  for (const auto& o : task.options) lo = std::min(lo, o.dollar_value), hi = std::max(hi, o.dollar_value);
  auto nu = [&](std::size_t i) { return (task.options[i].dollar_value - lo) / (hi - lo); };

  std::size_t pick = 0;
  double top = prediction.p_true.at(task.options[0].id);
  for (std::size_t i = 1; i < task.options.size(); ++i) {
    double v = prediction.p_true.at(task.options[i].id);
    if (v > top) top = v, pick = i;
  }
  for (std::size_t i = 0; i < task.options.size(); ++i)
    if (i != pick && prediction.p_true.at(task.options[i].id) == top) s.tie = true;
  s.max_p = top;
  if (threshold && task.options.size() == 2) {
    pick = apply_threshold(prediction.p_true.at(task.options[0].id), *threshold) ? 0 : 1;
    s.tie = false;
  }

  s.chosen = task.options[pick].id;
  s.accuracy = task.options[pick].dollar_value == hi ? 1.0 : 0.0;
  s.hard = nu(pick);
  for (std::size_t i = 0; i < p.size(); ++i) s.soft += p[i] * nu(i);
  s.brier = brier(task, prediction);
  return s;
}

Stability stability(const std::vector<EventTask>& tasks, const std::map<std::string, std::vector<Prediction>>& runs) {
  if (tasks.empty()) throw Error(ErrorCode::InvalidInput, "stability needs at least one task");
  Stability out;
  double conf_sum = 0.0;
  std::size_t conf_n = 0;
  for (const auto& t : tasks) {
    auto it = runs.find(t.id);
    if (it == runs.end() || it->second.size() < 2)
      throw Error(ErrorCode::InsufficientRuns, "task " + t.id + " needs at least two runs");
    std::vector<double> hard;
    for (const auto& p : it->second) {
      EventScore s = score_event(t, p);
      hard.push_back(s.hard);
      conf_sum += s.max_p;
      ++conf_n;
    }
    double mean = 0.0;
    for (double h : hard) mean += h / static_cast<double>(hard.size());
    double var = 0.0;
    for (double h : hard) var += (h - mean) * (h - mean) / static_cast<double>(hard.size());
    out.variance += var / static_cast<double>(tasks.size());
  }
  out.confidence = conf_sum / static_cast<double>(conf_n);
  return out;
}

MetricsReport aggregate(const std::vector<EventScore>& rows) {
  if (rows.empty()) throw Error(ErrorCode::InvalidInput, "aggregate needs at least one row");
  MetricsReport r;
  r.rows = rows;
  r.events = rows.size();
  const double n = static_cast<double>(rows.size());
  for (const auto& s : rows) {
    r.accuracy += s.accuracy / n;
    r.soft += s.soft / n;
    r.hard += s.hard / n;
    r.brier += s.brier / n;
  }
  return r;
}

MetricsReport evaluate(const std::vector<EventTask>& tasks, const std::vector<Prediction>& predictions,
                       std::optional<double> threshold, std::vector<LintIssue>* lint) {
  std::map<std::string, const EventTask*> by_id;
  for (const auto& t : tasks) by_id[t.id] = &t;
  std::vector<EventScore> rows;
  std::map<std::string, std::vector<Prediction>> runs;
  std::vector<EventTask> scored;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    auto it = by_id.find(p.task_id);
    if (it == by_id.end()) {
      if (lint) lint->push_back({i + 1, "prediction for unknown task " + p.task_id});
      continue;
    }
    rows.push_back(score_event(*it->second, p, threshold));
    if (runs[p.task_id].empty()) scored.push_back(*it->second);
    runs[p.task_id].push_back(p);
  }
  MetricsReport report = aggregate(rows);
  report.threshold = threshold;
  bool repeated = std::all_of(runs.begin(), runs.end(), [](const auto& kv) { return kv.second.size() >= 2; });
  if (repeated) {
    Stability s = stability(scored, runs);
    report.confidence = s.confidence;
    report.variance = s.variance;
  }
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& s : rows) {
    nlohmann::json row{{"id", s.task_id},     {"chosen", s.chosen}, {"accuracy", s.accuracy},
                       {"hard", s.hard},      {"soft", s.soft},     {"brier", s.brier},
                       {"tie", s.tie},        {"degenerate", s.degenerate}};
    if (s.run) row["run"] = *s.run;
    rows_json.push_back(row);
  }
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"events", events},         {"accuracy", accuracy},   {"soft", soft},
          {"hard", hard},             {"brier", brier},         {"confidence", opt(confidence)},
          {"variance", opt(variance)}, {"threshold", opt(threshold)}, {"rows", rows_json}};
}

std::string MetricsReport::table_row() const {
  auto pct = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
    return std::string(buf);
  };
  return pct(accuracy) + "," + pct(soft) + "," + pct(hard) + "," + pct(brier) + "," + pct(confidence) + "," +
         pct(variance);
}

std::string rows_csv(const MetricsReport& report) {
  std::string out = "id,run,chosen,accuracy,hard,soft,brier,tie\n";
  for (const auto& s : report.rows)
    out += s.task_id + "," + (s.run ? std::to_string(*s.run) : "") + "," + s.chosen + "," + num(s.accuracy) + "," +
           num(s.hard) + "," + num(s.soft) + "," + num(s.brier) + "," + (s.tie ? "1" : "0") + "\n";
  return out;
}

Calibration calibrate_threshold(const std::vector<std::pair<double, bool>>& validation) {
  if (validation.empty()) throw Error(ErrorCode::InvalidInput, "calibration needs at least one pair");
  std::vector<double> ps;
  for (const auto& [p, _] : validation) ps.push_back(p);
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  std::vector<double> grid{0.0, 1.0};
  for (std::size_t i = 1; i < ps.size(); ++i) grid.push_back((ps[i - 1] + ps[i]) / 2.0);
  std::sort(grid.begin(), grid.end());

  Calibration best{0.0, -1.0};
  for (double d : grid) {
    std::size_t hits = 0;
    for (const auto& [p, label] : validation) hits += apply_threshold(p, d) == label;
    double acc = static_cast<double>(hits) / static_cast<double>(validation.size());
    if (acc > best.accuracy) best = {d, acc};
  }
  return best;
}

}  // namespace spr
