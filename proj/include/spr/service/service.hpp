#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/error.hpp"
#include "spr/orchestrator/config.hpp"
#include "spr/orchestrator/task_pool.hpp"
#include "spr/service/store.hpp"

namespace spr {

// Service settings, one JSON document:
//
//   {"store": "spr-store", "host": "127.0.0.1", "port": 8080, "workers": 2,
//    "run": {RunConfig keys}, "agents": {"analyzer": spec, "grounder": spec, "synthesizer": spec}}
//
// SPR_STORE and SPR_PORT override the file. Relative paths resolve against
// base_dir (the config file's directory).
struct ServiceConfig {
  std::filesystem::path store = "spr-store";
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  nlohmann::json run = nlohmann::json::object();
  nlohmann::json agents;  // null when clients must supply agents per run
  std::filesystem::path base_dir;

  // Throws Error(InvalidConfig).
  static ServiceConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static ServiceConfig from_file(const std::filesystem::path& path);
  ServiceConfig with_env_overrides() const;
};

enum class RunStatus { Queued, Analyzing, Grounding, Synthesizing, Done, Failed };
std::string_view to_string(RunStatus status);

// Maps to HTTP 409: the request is well-formed but the target is in the wrong state.
class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& message) : Error(ErrorCode::ConstraintViolation, message) {}
};

// Run registry, scenario sessions and persistence. Every public call is
// thread-safe; edits within one session are serialized.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  // {"query": text, "config": {...}?, "agents": {...}?, "event": {"task": id, "option": id, "run": n}?}
  // Returns the run id; execution continues in the background.
  std::string submit_run(const nlohmann::json& body);
  nlohmann::json run_record(const std::string& run_id) const;
  // Blocks until the run is done or failed; returns its record.
  nlohmann::json wait(const std::string& run_id) const;

  std::string tree_document(const std::string& ref) const;

  nlohmann::json open_session(const std::string& run_id);
  // {"p_true": x?, "statement": s?, "add_children": {"<id>": statement, ...}?, "remove": true?}
  nlohmann::json patch_node(const std::string& session_id, const std::string& node_id, const nlohmann::json& body);
  nlohmann::json commit_session(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json session_record(const std::string& session_id) const;

  // Scores every finished run bound to the same event as `run_id` against the
  // events file. Binary tasks fill a missing option by complement.
  nlohmann::json run_metrics(const std::string& run_id, const std::string& events_path) const;

  Store& store() noexcept { return store_; }
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  struct Snapshot {
    std::string name;
    std::string tree_ref;
  };
  struct Session {
    std::string id;
    std::string run_id;
    std::string base_ref;
    std::string current_ref;
    nlohmann::json edits = nlohmann::json::array();
    std::vector<Snapshot> snapshots;
    std::mutex mu;
  };
  struct Run {
    std::string id;
    std::string query;
    nlohmann::json config;
    nlohmann::json agents;
    nlohmann::json event;
    RunStatus status = RunStatus::Queued;
    std::optional<std::string> tree_ref;
    std::optional<std::string> manifest_ref;
    std::optional<std::string> error;
    std::vector<std::string> sessions;
  };

  void execute(const std::string& run_id);
  void advance(const std::string& run_id, RunStatus status);
  nlohmann::json record_json(const Run& run) const;
  nlohmann::json session_json(const Session& s) const;
  void persist_run(const Run& run);
  void persist_session(const Session& s);
  void load_index();
  Run& find_run(const std::string& id);
  const Run& find_run(const std::string& id) const;
  std::shared_ptr<Session> find_session(const std::string& id) const;
  nlohmann::json agents_for(const Run& run) const;

  ServiceConfig config_;
  Store store_;
  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  std::map<std::string, Run> runs_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  long next_run_ = 1;
  long next_session_ = 1;
  std::unique_ptr<TaskPool> pool_;
};

}  // namespace spr
