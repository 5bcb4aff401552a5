#include "spr/service/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "spr/agents/factory.hpp"
#include "spr/core/document.hpp"
#include "spr/eval/metrics.hpp"
#include "spr/orchestrator/orchestrator.hpp"

namespace spr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error schema(const std::string& message) { return Error(ErrorCode::SchemaMismatch, message); }

// Runs a callback on the first call, then forwards.
class FirstCallHook final : public Agent {
 public:
  FirstCallHook(Agent& inner, std::function<void()> hook) : inner_(inner), hook_(std::move(hook)) {}
  std::string complete(const AgentRequest& request) override {
    std::call_once(once_, hook_);
    return inner_.complete(request);
  }

 private:
  Agent& inner_;
  std::function<void()> hook_;
  std::once_flag once_;
};

struct BuiltAgents {
  std::unique_ptr<Agent> analyzer, grounder, synthesizer;
};

BuiltAgents build_agents(const json& specs, const fs::path& base_dir) {
  if (!specs.is_object()) throw Error(ErrorCode::InvalidConfig, "agents must be an object");
  for (const char* role : {"analyzer", "grounder", "synthesizer"})
    if (!specs.contains(role)) throw Error(ErrorCode::InvalidConfig, std::string("agents need a ") + role);
  return {make_agent(specs["analyzer"], AgentRole::Analyzer, base_dir),
          make_agent(specs["grounder"], AgentRole::Grounder, base_dir),
          make_agent(specs["synthesizer"], AgentRole::Synthesizer, base_dir)};
}

long id_number(const std::string& id) {
  try {
    return std::stol(id.substr(1));
  } catch (const std::exception&) {
    return 0;
  }
}

RunStatus status_from_string(const std::string& text) {
  for (RunStatus s : {RunStatus::Queued, RunStatus::Analyzing, RunStatus::Grounding, RunStatus::Synthesizing,
                      RunStatus::Done, RunStatus::Failed})
    if (text == to_string(s)) return s;
  return RunStatus::Failed;
}

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

// Rebuilds `tree` with one node replaced (structure edits in sessions bypass
// the frozen-structure guard of add_children).
PropositionTree with_node(const PropositionTree& tree, const PropositionNode& node) {
  auto nodes = tree.nodes();
  nodes.at(node.id) = node;
  return PropositionTree(std::move(nodes), tree.created_at(), tree.config_snapshot());
}

PropositionNode cleared(PropositionNode n) {
  n.p_true.reset();
  n.report.reset();
  n.key_factor.reset();
  n.synthesis.reset();
  n.status = n.children.empty() ? NodeStatus::Pending : NodeStatus::Expanded;
  return n;
}

ChildStatements child_statements(const json& spec) {
  ChildStatements out;
  if (spec.is_object()) {
    for (const auto& [id, stmt] : spec.items()) {
      if (!stmt.is_string()) throw schema("add_children values must be statements");
      out.emplace_back(id, stmt.get<std::string>());
    }
  } else if (spec.is_array()) {
    for (const auto& c : spec) {
      if (!c.is_object() || !c.contains("id") || !c["id"].is_string() || !c.contains("statement") ||
          !c["statement"].is_string())
        throw schema("add_children entries need string id and statement");
      out.emplace_back(c["id"].get<std::string>(), c["statement"].get<std::string>());
    }
  } else {
    throw schema("add_children must be an object or a list");
  }
  if (out.empty()) throw Error(ErrorCode::InvalidInput, "add_children is empty");
  return out;
}

}  // namespace

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Queued: return "queued";
    case RunStatus::Analyzing: return "analyzing";
    case RunStatus::Grounding: return "grounding";
    case RunStatus::Synthesizing: return "synthesizing";
    case RunStatus::Done: return "done";
    case RunStatus::Failed: return "failed";
  }
  return "failed";
}

ServiceConfig ServiceConfig::from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "service config must be an object");
  static const std::set<std::string> known{"store", "host", "port", "workers", "run", "agents"};
  for (const auto& [k, _] : doc.items())
    if (!known.count(k)) throw Error(ErrorCode::InvalidConfig, "unknown service key '" + k + "'");
  ServiceConfig c;
  c.base_dir = base_dir;
  try {
    if (doc.contains("store")) c.store = doc["store"].get<std::string>();
    c.host = doc.value("host", c.host);
    c.port = doc.value("port", c.port);
    c.workers = doc.value("workers", c.workers);
    if (doc.contains("run")) c.run = doc["run"];
    if (doc.contains("agents")) c.agents = doc["agents"];
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("service config: ") + e.what());
  }
  if (c.store.is_relative() && !base_dir.empty()) c.store = base_dir / c.store;
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::InvalidConfig, "port out of range");
  if (c.workers < 1) throw Error(ErrorCode::InvalidConfig, "workers must be positive");
  RunConfig::from_json(c.run);
  return c;
}

ServiceConfig ServiceConfig::from_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::InvalidConfig, path.string() + " is not valid JSON");
  return from_json(doc, path.parent_path());
}

ServiceConfig ServiceConfig::with_env_overrides() const {
  ServiceConfig c = *this;
  if (const char* s = std::getenv("SPR_STORE"); s && *s) c.store = s;
  if (const char* p = std::getenv("SPR_PORT"); p && *p) {
    try {
      c.port = std::stoi(p);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "SPR_PORT is not a number");
    }
  }
  return c;
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      store_(config_.store),
      pool_(std::make_unique<TaskPool>(static_cast<std::size_t>(config_.workers))) {
  load_index();
}

Service::~Service() {
  pool_->wait();
  pool_.reset();
}

void Service::load_index() {
  for (const auto& rec : store_.read_index()) {
    std::string kind = rec.value("kind", "");
    std::string id = rec.value("id", "");
    if (kind == "run" && !id.empty()) {
      Run r;
      r.id = id;
      r.query = rec.value("query", "");
      r.config = rec.value("config", json::object());
      r.agents = rec.value("agents", json());
      r.event = rec.value("event", json());
      r.status = status_from_string(rec.value("status", "failed"));
      if (rec.contains("tree_ref") && rec["tree_ref"].is_string()) r.tree_ref = rec["tree_ref"];
      if (rec.contains("manifest_ref") && rec["manifest_ref"].is_string()) r.manifest_ref = rec["manifest_ref"];
      if (rec.contains("error") && rec["error"].is_string()) r.error = rec["error"];
      r.sessions = rec.value("sessions", std::vector<std::string>{});
      if (r.status != RunStatus::Done && r.status != RunStatus::Failed) {
        r.status = RunStatus::Failed;
        r.error = "interrupted by a restart";
      }
      next_run_ = std::max(next_run_, id_number(id) + 1);
      runs_[id] = std::move(r);
    } else if (kind == "session" && !id.empty()) {
      auto s = std::make_shared<Session>();
      s->id = id;
      s->run_id = rec.value("run_id", "");
      s->base_ref = rec.value("base_ref", "");
      s->current_ref = rec.value("current_ref", "");
      s->edits = rec.value("edits", json::array());
      for (const auto& snap : rec.value("snapshots", json::array()))
        s->snapshots.push_back({snap.value("name", ""), snap.value("tree_ref", "")});
      next_session_ = std::max(next_session_, id_number(id) + 1);
      sessions_[id] = std::move(s);
    }
  }
}

json Service::agents_for(const Run& run) const { return run.agents.is_null() ? config_.agents : run.agents; }

Service::Run& Service::find_run(const std::string& id) {
  auto it = runs_.find(id);
  if (it == runs_.end()) throw Error(ErrorCode::NotFound, "no run " + id);
  return it->second;
}

const Service::Run& Service::find_run(const std::string& id) const {
  auto it = runs_.find(id);
  if (it == runs_.end()) throw Error(ErrorCode::NotFound, "no run " + id);
  return it->second;
}

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session " + id);
  return it->second;
}

json Service::record_json(const Run& run) const {
  json manifest = nullptr;
  if (run.manifest_ref && store_.contains(*run.manifest_ref)) manifest = store_.get(*run.manifest_ref);
  return {{"id", run.id},
          {"query", run.query},
          {"status", std::string(to_string(run.status))},
          {"config", run.config},
          {"event", run.event},
          {"tree_ref", opt_json(run.tree_ref)},
          {"manifest_ref", opt_json(run.manifest_ref)},
          {"manifest", manifest},
          {"error", opt_json(run.error)},
          {"sessions", run.sessions}};
}

void Service::persist_run(const Run& run) {
  store_.append_index({{"kind", "run"},
                       {"id", run.id},
                       {"query", run.query},
                       {"config", run.config},
                       {"agents", run.agents},
                       {"event", run.event},
                       {"status", std::string(to_string(run.status))},
                       {"tree_ref", opt_json(run.tree_ref)},
                       {"manifest_ref", opt_json(run.manifest_ref)},
                       {"error", opt_json(run.error)},
                       {"sessions", run.sessions}});
}

json Service::session_json(const Session& s) const {
  json snaps = json::array();
  for (const auto& snap : s.snapshots) snaps.push_back({{"name", snap.name}, {"tree_ref", snap.tree_ref}});
  return {{"id", s.id},
          {"run_id", s.run_id},
          {"base_ref", s.base_ref},
          {"current_ref", s.current_ref},
          {"edits", s.edits},
          {"snapshots", snaps}};
}

void Service::persist_session(const Session& s) {
  json rec = session_json(s);
  rec["kind"] = "session";
  store_.append_index(rec);
}

std::string Service::submit_run(const json& body) {
  if (!body.is_object()) throw schema("run request must be an object");
  static const std::set<std::string> known{"query", "config", "agents", "event"};
  for (const auto& [k, _] : body.items())
    if (!known.count(k)) throw schema("unknown run request key '" + k + "'");
  if (!body.contains("query") || !body["query"].is_string() || body["query"].get<std::string>().empty())
    throw schema("run request needs a non-empty query");

  json config = config_.run.is_object() ? config_.run : json::object();
  if (body.contains("config")) {
    if (!body["config"].is_object()) throw schema("config must be an object");
    config.update(body["config"]);
  }
  RunConfig::from_json(config);  // validates

  json agents = body.contains("agents") ? body["agents"] : config_.agents;
  if (agents.is_null()) throw Error(ErrorCode::InvalidConfig, "no agents configured for this run");
  build_agents(agents, config_.base_dir);  // validates

  json event = body.value("event", json());
  if (!event.is_null() &&
      (!event.is_object() || !event.contains("task") || !event["task"].is_string() || !event.contains("option") ||
       !event["option"].is_string()))
    throw schema("event needs string task and option ids");

  std::string id;
  {
    std::lock_guard lock(mu_);
    id = "r" + std::to_string(next_run_++);
    Run r;
    r.id = id;
    r.query = body["query"].get<std::string>();
    r.config = config;
    r.agents = body.contains("agents") ? body["agents"] : json();
    r.event = event;
    persist_run(r);
    runs_[id] = std::move(r);
  }
  pool_->submit([this, id] { execute(id); });
  return id;
}

void Service::advance(const std::string& run_id, RunStatus status) {
  std::lock_guard lock(mu_);
  Run& r = find_run(run_id);
  if (static_cast<int>(status) > static_cast<int>(r.status)) r.status = status;
  changed_.notify_all();
}

void Service::execute(const std::string& run_id) {
  std::string query;
  json config_doc, agents_doc;
  {
    std::lock_guard lock(mu_);
    const Run& r = find_run(run_id);
    query = r.query;
    config_doc = r.config;
    agents_doc = agents_for(r);
  }
  std::optional<std::string> tree_ref, manifest_ref, error;
  try {
    RunConfig cfg = RunConfig::from_json(config_doc);
    BuiltAgents built = build_agents(agents_doc, config_.base_dir);
    advance(run_id, RunStatus::Analyzing);
    FirstCallHook grounder(*built.grounder, [&] { advance(run_id, RunStatus::Grounding); });
    FirstCallHook synthesizer(*built.synthesizer, [&] { advance(run_id, RunStatus::Synthesizing); });
    RunResult result = run_recursive(query, {built.analyzer.get(), &grounder, &synthesizer}, cfg);
    tree_ref = store_.put_tree(result.tree);
    manifest_ref = store_.put(run_manifest(query, cfg, agents_doc, *tree_ref, result.stats));
  } catch (const std::exception& e) {
    error = e.what();
  }
  std::lock_guard lock(mu_);
  Run& r = find_run(run_id);
  r.tree_ref = tree_ref;
  r.manifest_ref = manifest_ref;
  r.error = error;
  r.status = error ? RunStatus::Failed : RunStatus::Done;
  try {
    persist_run(r);
  } catch (const Error&) {
    // The in-memory record stays authoritative for this process.
  }
  changed_.notify_all();
}

json Service::run_record(const std::string& run_id) const {
  std::lock_guard lock(mu_);
  return record_json(find_run(run_id));
}

json Service::wait(const std::string& run_id) const {
  std::unique_lock lock(mu_);
  changed_.wait(lock, [&] {
    RunStatus s = find_run(run_id).status;
    return s == RunStatus::Done || s == RunStatus::Failed;
  });
  return record_json(find_run(run_id));
}

std::string Service::tree_document(const std::string& ref) const { return store_.get_text(ref); }

json Service::open_session(const std::string& run_id) {
  std::lock_guard lock(mu_);
  Run& r = find_run(run_id);
  if (r.status != RunStatus::Done || !r.tree_ref) throw ConflictError("run " + run_id + " has not finished");
  auto s = std::make_shared<Session>();
  s->id = "s" + std::to_string(next_session_++);
  s->run_id = run_id;
  s->base_ref = s->current_ref = *r.tree_ref;
  r.sessions.push_back(s->id);
  persist_session(*s);
  persist_run(r);
  sessions_[s->id] = s;
  return session_json(*s);
}

json Service::session_record(const std::string& session_id) const {
  auto s = find_session(session_id);
  std::lock_guard lock(s->mu);
  return session_json(*s);
}

json Service::patch_node(const std::string& session_id, const std::string& node_id, const json& body) {
  auto s = find_session(session_id);
  if (!body.is_object()) throw schema("edit must be an object");
  static const std::set<std::string> known{"p_true", "statement", "add_children", "remove"};
  for (const auto& [k, _] : body.items())
    if (!known.count(k)) throw schema("unknown edit key '" + k + "'");
  if (body.contains("p_true") && !body["p_true"].is_number()) throw schema("p_true must be a number");
  if (body.contains("statement") && !body["statement"].is_string()) throw schema("statement must be a string");
  if (body.contains("remove") && !body["remove"].is_boolean()) throw schema("remove must be a boolean");
  bool remove = body.value("remove", false);
  bool add = body.contains("add_children");
  if (body.empty()) throw schema("edit is empty");
  if (remove && (add || body.contains("p_true") || body.contains("statement")))
    throw Error(ErrorCode::InvalidInput, "remove cannot be combined with other edits");
  if (add && body.contains("p_true"))
    throw Error(ErrorCode::InvalidInput, "a node gaining children takes its value from synthesis");

  json config_doc, agents_doc;
  {
    std::lock_guard lock(mu_);
    const Run& r = find_run(s->run_id);
    config_doc = r.config;
    agents_doc = agents_for(r);
  }

  std::lock_guard session_lock(s->mu);
  const PropositionTree before = store_.get_tree(s->current_ref);
  if (!NodeId::is_valid(node_id) || !before.contains(NodeId::parse(node_id)))
    throw Error(ErrorCode::NotFound, "no node " + node_id + " in session " + session_id);
  if (!before.node(before.root()).has_value()) throw ConflictError("session tree is not synthesized");
  const NodeId target = NodeId::parse(node_id);

  PropositionTree work = before;
  if (remove) {
    if (target == work.root()) throw Error(ErrorCode::InvalidInput, "the root cannot be removed");
    NodeId parent = *work.parent_of(target);
    work = remove_subtree(work, target);
    work = with_node(work, cleared(work.node(parent)));
  }
  if (add) {
    ChildStatements kids = child_statements(body["add_children"]);
    PropositionNode host = cleared(work.node(target));
    host.status = NodeStatus::Pending;
    work = add_children(with_node(work, host), target, kids, work.node(target).causality.value_or(""));
  }

  std::vector<NodeEdit> edits;
  if (body.contains("p_true") || body.contains("statement")) {
    NodeEdit e{target, std::nullopt, std::nullopt};
    if (body.contains("p_true")) e.p_true = body["p_true"].get<double>();
    if (body.contains("statement")) e.statement = body["statement"].get<std::string>();
    edits.push_back(e);
  }

  RunConfig cfg = RunConfig::from_json(config_doc);
  BuiltAgents agents = build_agents(agents_doc, config_.base_dir);
  ResynthesisResult result = resynthesize(work, edits, *agents.synthesizer, cfg, agents.grounder.get());

  std::string ref = store_.put_tree(result.tree);
  // Delta against the session's previous tree, after the canonical round trip.
  PropositionTree after = store_.get_tree(ref);
  json delta = json::array(), removed = json::array();
  for (const auto& [id, node] : after.nodes()) {
    std::optional<double> old;
    if (before.contains(id)) old = before.node(id).p_true;
    if (node.p_true != old)
      delta.push_back({{"id", id.str()}, {"old", old ? json(*old) : json(nullptr)}, {"new", *node.p_true}});
  }
  for (const auto& [id, _] : before.nodes())
    if (!after.contains(id)) removed.push_back(id.str());
  json dirty = json::array(), edited = json::array();
  for (const auto& id : result.dirty) dirty.push_back(id.str());
  for (const auto& id : result.edited) edited.push_back(id.str());

  s->edits.push_back({{"node", node_id}, {"edit", body}});
  s->current_ref = ref;
  persist_session(*s);
  return {{"session_id", s->id},
          {"base_ref", s->base_ref},
          {"tree_ref", ref},
          {"delta", delta},
          {"removed", removed},
          {"dirty", dirty},
          {"edited", edited},
          {"synthesizer_calls", result.stats.counters.synthesizer_calls},
          {"grounder_calls", result.stats.counters.grounder_calls}};
}

json Service::commit_session(const std::string& session_id, const json& body) {
  auto s = find_session(session_id);
  if (!body.is_null() && !body.is_object()) throw schema("commit body must be an object");
  std::lock_guard lock(s->mu);
  std::string name = "snapshot-" + std::to_string(s->snapshots.size() + 1);
  if (body.is_object() && body.contains("name")) {
    if (!body["name"].is_string() || body["name"].get<std::string>().empty())
      throw schema("snapshot name must be a non-empty string");
    name = body["name"].get<std::string>();
  }
  for (const auto& snap : s->snapshots)
    if (snap.name == name) throw ConflictError("snapshot " + name + " already exists");
  s->snapshots.push_back({name, s->current_ref});
  persist_session(*s);
  return {{"session_id", s->id}, {"name", name}, {"tree_ref", s->current_ref}};
}

json Service::run_metrics(const std::string& run_id, const std::string& events_path) const {
  json event;
  std::vector<std::pair<json, std::string>> bound;  // (event binding, tree ref) of finished runs
  {
    std::lock_guard lock(mu_);
    const Run& r = find_run(run_id);
    if (r.event.is_null()) throw Error(ErrorCode::InvalidInput, "run " + run_id + " is not bound to an event");
    event = r.event;
    for (const auto& [_, other] : runs_)
      if (other.status == RunStatus::Done && other.tree_ref && other.event.is_object() &&
          other.event["task"] == event["task"])
        bound.emplace_back(other.event, *other.tree_ref);
  }
  if (events_path.empty()) throw schema("metrics need an events file");
  fs::path path = events_path;
  if (path.is_relative() && !config_.base_dir.empty()) path = config_.base_dir / path;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "no events file " + events_path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto events = parse_events(ss.str());
  const std::string task_id = event["task"].get<std::string>();
  auto task = std::find_if(events.records.begin(), events.records.end(),
                           [&](const EventTask& t) { return t.id == task_id; });
  if (task == events.records.end()) throw Error(ErrorCode::NotFound, "no event " + task_id + " in " + events_path);

  std::map<int, std::map<std::string, double>> by_run;
  for (const auto& [binding, ref] : bound) {
    double p = *store_.get_tree(ref).node(NodeId::parse("P0")).p_true;
    by_run[binding.value("run", 0)][binding["option"].get<std::string>()] = p;
  }
  std::vector<Prediction> predictions;
  json lint = json::array();
  for (auto& [run, p] : by_run) {
    if (task->options.size() == 2 && p.size() == 1) {
      const auto& have = p.begin()->first;
      const auto& other = task->options[0].id == have ? task->options[1].id : task->options[0].id;
      p[other] = binary_complement(p.begin()->second);
    }
    if (p.size() != task->options.size()) {
      lint.push_back("run group " + std::to_string(run) + " does not cover every option");
      continue;
    }
    predictions.push_back({task_id, run, p, json()});
  }
  if (predictions.empty()) throw ConflictError("no finished runs cover the options of " + task_id);
  json report = evaluate({*task}, predictions).to_json();
  report["lint"] = lint;
  return report;
}

}  // namespace spr
