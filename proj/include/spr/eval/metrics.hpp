#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace spr {

struct EventOption {
  std::string id;
  std::string statement;
  double dollar_value = 0.0;
};

struct EventTask {
  std::string id;
  std::string description;
  std::string current_date;  // YYYY-MM-DD cutoff handed to agents
  std::vector<EventOption> options;

  // Throws Error(SchemaMismatch): fewer than two options, duplicate option
  // ids, or every option worth the same.
  void validate() const;
  static EventTask from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct Prediction {
  std::string task_id;
  std::optional<int> run;
  std::map<std::string, double> p_true;  // option id -> probability
  nlohmann::json metadata;

  static Prediction from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct LintIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename T>
struct Ingested {
  std::vector<T> records;
  std::vector<LintIssue> lint;
};

// One record per line; blank lines are ignored and malformed lines are
// reported instead of failing the batch.
Ingested<EventTask> parse_events(std::string_view text);
Ingested<Prediction> parse_predictions(std::string_view text);

struct EventScore {
  std::string task_id;
  std::optional<int> run;
  std::string chosen;  // option picked by argmax (or the threshold for binary tasks)
  double accuracy = 0.0;
  double hard = 0.0;
  double soft = 0.0;
  double brier = 0.0;
  double max_p = 0.0;  // raw highest p_true
  bool tie = false;         // argmax was shared; first option in order taken
  bool degenerate = false;  // every p_true was zero; treated as uniform
};

// Throws Error(SchemaMismatch) when the prediction does not cover exactly the
// task's options and Error(InvalidInput) for values outside [0,1]. With a
// threshold, a binary task picks its first option iff that option's p_true > threshold.
EventScore score_event(const EventTask& task, const Prediction& prediction,
                       std::optional<double> threshold = std::nullopt);

// (1/|O|) sum_o (p~_o - y_o)^2 with sum-normalized p~ and one-hot truth split
// across co-best options.
double brier(const EventTask& task, const Prediction& prediction);

struct Stability {
  double confidence = 0.0;  // mean raw highest p_true over tasks and runs
  double variance = 0.0;    // mean over tasks of the population variance of hard
};

// `runs` maps task id -> its repeated predictions. Throws
// Error(InsufficientRuns) when a task has fewer than two runs.
Stability stability(const std::vector<EventTask>& tasks,
                    const std::map<std::string, std::vector<Prediction>>& runs);

struct MetricsReport {
  std::size_t events = 0;
  double accuracy = 0.0;
  double soft = 0.0;
  double hard = 0.0;
  double brier = 0.0;
  std::optional<double> confidence;
  std::optional<double> variance;
  std::optional<double> threshold;
  std::vector<EventScore> rows;

  nlohmann::json to_json() const;
  // "Accu,Soft,Hard,BS,Conf,Var" in percent with two decimals.
  std::string table_row() const;
};

// Unweighted means. Throws Error(InvalidInput) when empty.
MetricsReport aggregate(const std::vector<EventScore>& rows);

// Scores every prediction against its task and aggregates; predictions for
// unknown tasks are linted. Stability is filled in when every scored task has
// at least two runs.
MetricsReport evaluate(const std::vector<EventTask>& tasks, const std::vector<Prediction>& predictions,
                       std::optional<double> threshold = std::nullopt, std::vector<LintIssue>* lint = nullptr);

std::string rows_csv(const MetricsReport& report);

struct Calibration {
  double delta = 0.0;
  double accuracy = 0.0;
};

// Grid search over {0, 1} and the midpoints of the sorted distinct p values;
// the smallest delta wins ties. Throws Error(InvalidInput) when empty.
Calibration calibrate_threshold(const std::vector<std::pair<double, bool>>& validation);

// Lines of {"p_true": p, "label": true|false}.
Ingested<std::pair<double, bool>> parse_calibration(std::string_view text);

inline bool apply_threshold(double p, double delta) { return p > delta; }

}  // namespace spr
