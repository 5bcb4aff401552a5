#include <doctest.h>

#include <httplib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "spr/core/document.hpp"
#include "spr/error.hpp"
#include "spr/service/http.hpp"
#include "spr/service/service.hpp"
#include "spr/service/store.hpp"
#include "support/fixtures.hpp"

using namespace spr;
using nlohmann::json;
namespace fs = std::filesystem;
namespace st = spr::testing;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("spr-service-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an spr::Error");
  return ErrorCode::Io;
}

// Depth-1 pipeline extended so P4 can gain two children and P0 can be
// re-synthesized over three children after a removal.
json depth1_request() {
  json doc = st::load_fixture("depth1_pipeline.json");
  auto& agents = doc["agents"];
  auto& grounder = agents["grounder"]["fixture"]["outputs"];
  grounder["P4.1"] = {{"p_true", 0.6}, {"key_factor", "Evidence gathered for P4.1."}};
  grounder["P4.2"] = {{"p_true", 0.9}, {"key_factor", "Evidence gathered for P4.2."}};
  auto& synth = agents["synthesizer"]["fixture"]["outputs"];
  synth["P4"] = {{"beta", {{"beta_0", 0.0}, {"P4.1", 0.5}, {"P4.2", 0.5}}}, {"key_factor", "P4 from its parts."}};
  json four = synth["P0"];
  json three = four;
  three["beta"].erase("P4");
  synth["P0"] = {{"attempts", {four, three}}};
  return {{"query", doc["query"]}, {"config", doc["config"]}, {"agents", agents}};
}

double root_of(Service& svc, const std::string& ref) { return *svc.store().get_tree(ref).node(NodeId::parse("P0")).p_true; }

}  // namespace

TEST_CASE("store round trip and integrity") {
  TempDir dir;
  Store store(dir.path);
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  auto result = st::golden_run();
  std::string ref = store.put_tree(result.tree);
  CHECK(Store::is_ref(ref));
  CHECK(store.put_tree(st::golden_run(1).tree) == ref);
  CHECK(store.get_text(ref) == serialize_tree(result.tree));
  CHECK(serialize_tree(store.get_tree(ref)) == serialize_tree(result.tree));

  CHECK(code_of([&] { store.get_text("sha256:" + std::string(64, '0')); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { store.get_text("md5:abc"); }) == ErrorCode::InvalidInput);

  std::ofstream(dir.path / "objects" / (ref.substr(7) + ".json"), std::ios::app) << " ";
  CHECK(code_of([&] { store.get_text(ref); }) == ErrorCode::IntegrityError);

  store.append_index({{"kind", "x"}, {"n", 1}});
  store.append_index({{"kind", "x"}, {"n", 2}});
  std::ofstream(dir.path / "index.jsonl", std::ios::app) << "{\"kind\": \"x\", \"n\"";
  auto records = store.read_index();
  REQUIRE(records.size() == 2);
  CHECK(records[1]["n"] == 2);
}

TEST_CASE("service config") {
  ServiceConfig c = ServiceConfig::from_json({{"store", "s"}, {"port", 9000}}, "/base");
  CHECK(c.store == fs::path("/base/s"));
  CHECK(c.port == 9000);
  CHECK(code_of([] { ServiceConfig::from_json({{"bogus", 1}}); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { ServiceConfig::from_json({{"workers", 0}}); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("run lifecycle and what-if sessions") {
  TempDir dir;
  ServiceConfig config;
  config.store = dir.path / "store";
  Service svc(config);

  std::string id = svc.submit_run(depth1_request());
  json rec = svc.wait(id);
  REQUIRE(rec["status"] == "done");
  const std::string baseline = rec["tree_ref"];
  const std::string baseline_bytes = svc.tree_document(baseline);
  CHECK(root_of(svc, baseline) == doctest::Approx(0.87195).epsilon(1e-9));
  CHECK(rec["manifest"]["tree_ref"] == baseline);

  json session = svc.open_session(id);
  const std::string sid = session["id"];
  CHECK(session["base_ref"] == baseline);

  SUBCASE("value edit propagates to the root") {
    json out = svc.patch_node(sid, "P2", {{"p_true", 1.0}});
    CHECK(out["base_ref"] == baseline);
    CHECK(root_of(svc, out["tree_ref"]) == doctest::Approx(0.90075).epsilon(1e-9));
    REQUIRE(out["delta"].size() == 2);
    CHECK(out["delta"][0]["id"] == "P0");
    CHECK(out["delta"][0]["old"].get<double>() == doctest::Approx(0.87195));
    CHECK(out["delta"][1]["id"] == "P2");
    CHECK(out["synthesizer_calls"] == 1);
    CHECK(svc.tree_document(baseline) == baseline_bytes);

    json again = svc.patch_node(sid, "P2", {{"p_true", 1.0}});
    CHECK(again["delta"].empty());
    CHECK(again["tree_ref"] == out["tree_ref"]);
    CHECK(again["synthesizer_calls"] == 0);

    // Replaying the edit log in a fresh session lands on the same tree.
    std::string other = svc.open_session(id)["id"];
    json last;
    json log = svc.session_record(sid)["edits"];
    for (const auto& e : log) last = svc.patch_node(other, e["node"], e["edit"]);
    CHECK(last["tree_ref"] == out["tree_ref"]);

    json snap = svc.commit_session(sid, {{"name", "optimistic"}});
    CHECK(snap["tree_ref"] == out["tree_ref"]);
    CHECK(code_of([&] { svc.commit_session(sid, {{"name", "optimistic"}}); }) == ErrorCode::ConstraintViolation);
    CHECK(svc.commit_session(sid, json())["name"] == "snapshot-2");
  }

  SUBCASE("invalid edits leave the session untouched") {
    CHECK(code_of([&] { svc.patch_node(sid, "P2", {{"p_true", 1.5}}); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { svc.patch_node(sid, "P0", {{"remove", true}}); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { svc.patch_node(sid, "P9", {{"p_true", 0.5}}); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { svc.patch_node(sid, "Q1", {{"p_true", 0.5}}); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { svc.patch_node("s999", "P1", {{"p_true", 0.5}}); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { svc.patch_node(sid, "P1", {{"colour", 1}}); }) == ErrorCode::SchemaMismatch);
    CHECK(code_of([&] { svc.patch_node(sid, "P1", {{"p_true", "high"}}); }) == ErrorCode::SchemaMismatch);
    CHECK(code_of([&] { svc.patch_node(sid, "P4", {{"add_children", {{"P1.1", "wrong parent"}}}}); }) ==
          ErrorCode::IdConflict);
    CHECK(code_of([&] { svc.patch_node(sid, "P4", {{"add_children", {{"P4.1", ""}}}}); }) == ErrorCode::InvalidInput);
    json s = svc.session_record(sid);
    CHECK(s["current_ref"] == baseline);
    CHECK(s["edits"].empty());
  }

  SUBCASE("structural edits") {
    json grown = svc.patch_node(sid, "P4", {{"add_children", {{"P4.1", "Part one."}, {"P4.2", "Part two."}}}});
    PropositionTree t = svc.store().get_tree(grown["tree_ref"]);
    CHECK(t.contains(NodeId::parse("P4.2")));
    CHECK(*t.node(NodeId::parse("P4")).p_true == doctest::Approx(0.75));
    CHECK(*t.node(NodeId::parse("P0")).p_true == doctest::Approx(0.87195 + 0.15 * (0.75 - 0.755)));

    json pruned = svc.patch_node(sid, "P4", {{"remove", true}});
    CHECK(pruned["removed"] == json::array({"P4", "P4.1", "P4.2"}));
    double expected = 0.05 + 0.2 * 0.7895 + 0.3 * 0.904 + 0.3 * 0.932;
    CHECK(root_of(svc, pruned["tree_ref"]) == doctest::Approx(expected));
    CHECK(svc.tree_document(baseline) == baseline_bytes);
  }

  CHECK(code_of([&] { svc.open_session("r999"); }) == ErrorCode::NotFound);
}

TEST_CASE("state survives a restart") {
  TempDir dir;
  ServiceConfig config;
  config.store = dir.path / "store";
  std::string id, sid, ref;
  {
    Service svc(config);
    id = svc.submit_run(depth1_request());
    svc.wait(id);
    sid = svc.open_session(id)["id"];
    ref = svc.patch_node(sid, "P2", {{"p_true", 1.0}})["tree_ref"];
  }
  Service svc(config);
  CHECK(svc.run_record(id)["status"] == "done");
  CHECK(svc.session_record(sid)["current_ref"] == ref);
  CHECK(svc.submit_run(depth1_request()) != id);
}

TEST_CASE("failed runs and request validation") {
  TempDir dir;
  ServiceConfig config;
  config.store = dir.path / "store";
  Service svc(config);

  CHECK(code_of([&] { svc.submit_run({{"query", "no agents"}}); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { svc.submit_run({{"query", ""}}); }) == ErrorCode::SchemaMismatch);
  json bad = depth1_request();
  bad["config"]["L_max"] = -1;
  CHECK(code_of([&] { svc.submit_run(bad); }) == ErrorCode::InvalidConfig);

  json broken = depth1_request();
  broken["agents"]["synthesizer"]["fixture"]["outputs"].erase("P0");
  std::string id = svc.submit_run(broken);
  json rec = svc.wait(id);
  CHECK(rec["status"] == "failed");
  CHECK(rec["error"].is_string());
  CHECK(code_of([&] { svc.open_session(id); }) == ErrorCode::ConstraintViolation);
}

TEST_CASE("metrics over runs bound to an event") {
  TempDir dir;
  ServiceConfig config;
  config.store = dir.path / "store";
  config.base_dir = SPR_FIXTURE_DIR;
  Service svc(config);

  json req = depth1_request();
  req["event"] = {{"task", "E1"}, {"option", "A"}, {"run", 0}};
  std::string id = svc.submit_run(req);
  svc.wait(id);
  json report = svc.run_metrics(id, "events5.jsonl");
  CHECK(report["events"] == 1);
  CHECK(report["soft"].get<double>() == doctest::Approx(0.87195));

  std::string plain = svc.submit_run(depth1_request());
  svc.wait(plain);
  CHECK(code_of([&] { svc.run_metrics(plain, "events5.jsonl"); }) == ErrorCode::InvalidInput);
  CHECK(code_of([&] { svc.run_metrics(id, "missing.jsonl"); }) == ErrorCode::NotFound);
}

TEST_CASE("http surface") {
  TempDir dir;
  ServiceConfig config;
  config.store = dir.path / "store";
  Service svc(config);
  HttpServer server(svc);
  int port = server.bind("127.0.0.1", 0);
  std::thread loop([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);

  auto body = [](const httplib::Result& r) { return json::parse(r->body); };
  auto error_code = [&](const httplib::Result& r) { return body(r)["error"]["code"].get<std::string>(); };

  auto health = client.Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);

  auto created = client.Post("/v1/runs", depth1_request().dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 202);
  std::string id = body(created)["run_id"];
  svc.wait(id);

  auto rec = client.Get("/v1/runs/" + id);
  CHECK(rec->status == 200);
  std::string baseline = body(rec)["tree_ref"];
  auto tree = client.Get("/v1/trees/" + baseline);
  CHECK(tree->status == 200);
  CHECK(tree->body == svc.tree_document(baseline));

  auto session = client.Post("/v1/runs/" + id + "/sessions", "", "application/json");
  CHECK(session->status == 201);
  std::string sid = body(session)["id"];

  auto patched = client.Patch("/v1/sessions/" + sid + "/nodes/P2", R"({"p_true": 1.0})", "application/json");
  REQUIRE(patched);
  CHECK(patched->status == 200);
  CHECK(body(patched)["delta"][0]["new"].get<double>() == doctest::Approx(0.90075));

  auto baseline_edit = client.Patch("/v1/runs/" + id + "/nodes/P2", R"({"p_true": 1.0})", "application/json");
  CHECK(baseline_edit->status == 409);
  CHECK(client.Patch("/v1/runs/r999/nodes/P2", R"({"p_true": 1.0})", "application/json")->status == 404);
  CHECK(client.Get("/v1/runs/r999")->status == 404);
  CHECK(client.Get("/v1/trees/sha256:" + std::string(64, 'a'))->status == 404);
  CHECK(client.Patch("/v1/sessions/s999/nodes/P2", R"({"p_true": 1.0})", "application/json")->status == 404);

  auto invalid = client.Patch("/v1/sessions/" + sid + "/nodes/P2", R"({"p_true": 2.0})", "application/json");
  CHECK(invalid->status == 422);
  CHECK(error_code(invalid) == "InvalidInput");
  auto malformed = client.Patch("/v1/sessions/" + sid + "/nodes/P2", "{not json", "application/json");
  CHECK(malformed->status == 400);
  CHECK(client.Post("/v1/runs", R"({"query": 3})", "application/json")->status == 400);

  auto commit = client.Post("/v1/sessions/" + sid + "/commit", R"({"name": "a"})", "application/json");
  CHECK(commit->status == 201);
  CHECK(client.Post("/v1/sessions/" + sid + "/commit", R"({"name": "a"})", "application/json")->status == 409);
  CHECK(body(client.Get("/v1/sessions/" + sid))["current_ref"] == body(patched)["tree_ref"]);

  server.stop();
  loop.join();
}
