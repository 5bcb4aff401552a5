#include "spr/agents/remote.hpp"

#include <condition_variable>
#include <cstdlib>
#include <map>
#include <mutex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "spr/error.hpp"

namespace spr {

struct RemoteChatAgent::Gate {
  std::mutex mu;
  std::condition_variable cv;
  int in_flight = 0;
  int limit = 1;
};

namespace {

std::shared_ptr<RemoteChatAgent::Gate> gate_for(const std::string& endpoint, int limit);

std::string transport_message(const std::string& what, httplib::Error err) {
  return what + ": " + httplib::to_string(err);
}

}  // namespace

Endpoint Endpoint::parse(const std::string& locator) {
  const std::string scheme = "http://";
  if (locator.rfind(scheme, 0) != 0) throw Error(ErrorCode::InvalidConfig, "endpoint must start with http://: " + locator);
  std::string rest = locator.substr(scheme.size());
  Endpoint ep;
  auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  ep.path = slash == std::string::npos ? "" : rest.substr(slash);
  while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
  auto colon = authority.rfind(':');
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      ep.port = std::stoi(authority.substr(colon + 1), &used);
      if (used != authority.size() - colon - 1 || ep.port <= 0 || ep.port > 65535) throw std::invalid_argument("port");
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad port in endpoint " + locator);
    }
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw Error(ErrorCode::InvalidConfig, "endpoint has no host: " + locator);
  ep.host = authority;
  return ep;
}

namespace {

std::shared_ptr<RemoteChatAgent::Gate> gate_for(const std::string& endpoint, int limit) {
  static std::mutex mu;
  static std::map<std::string, std::weak_ptr<RemoteChatAgent::Gate>> gates;
  std::lock_guard lock(mu);
  auto& slot = gates[endpoint];
  auto gate = slot.lock();
  if (!gate) {
    gate = std::make_shared<RemoteChatAgent::Gate>();
    gate->limit = std::max(1, limit);
    slot = gate;
  }
  return gate;
}

}  // namespace

RemoteChatAgent::RemoteChatAgent(AgentConfig config) : config_(std::move(config)) {
  config_.validate();
  endpoint_ = Endpoint::parse(config_.endpoint);
  gate_ = gate_for(config_.endpoint, config_.max_concurrent_calls);
}

RemoteChatAgent::~RemoteChatAgent() = default;

std::string RemoteChatAgent::complete(const AgentRequest& request) {
  nlohmann::json body = {{"model", config_.model}, {"temperature", config_.temperature}};
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  {
    std::unique_lock lock(gate_->mu);
    gate_->cv.wait(lock, [&] { return gate_->in_flight < gate_->limit; });
    ++gate_->in_flight;
  }
  struct Release {
    Gate& g;
    ~Release() {
      {
        std::lock_guard lock(g.mu);
        --g.in_flight;
      }
      g.cv.notify_one();
    }
  } release{*gate_};

  httplib::Client client(endpoint_.host, endpoint_.port);
  client.set_read_timeout(300, 0);
  auto res = client.Post(endpoint_.path.empty() ? "/" : endpoint_.path, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::Transport, transport_message("chat endpoint " + config_.endpoint, res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::Transport, "chat endpoint returned HTTP " + std::to_string(res->status));
  auto doc = nlohmann::json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("content") || !doc["content"].is_string())
    throw Error(ErrorCode::Transport, "chat endpoint reply has no \"content\" string");
  return doc["content"].get<std::string>();
}

HttpSearchBackend::HttpSearchBackend(const std::string& endpoint) : endpoint_(Endpoint::parse(endpoint)) {}

HttpSearchBackend HttpSearchBackend::from_env() {
  const char* endpoint = std::getenv("SEARCH_ENDPOINT");
  if (!endpoint || !*endpoint) throw Error(ErrorCode::InvalidConfig, "SEARCH_ENDPOINT is not set");
  return HttpSearchBackend(endpoint);
}

std::vector<SearchResult> HttpSearchBackend::query(const std::string& query, const std::string& cutoff) {
  httplib::Client client(endpoint_.host, endpoint_.port);
  httplib::Params params{{"q", query}, {"before", cutoff}};
  auto res = client.Get(endpoint_.path.empty() ? "/" : endpoint_.path, params, httplib::Headers{});
  if (!res) throw Error(ErrorCode::Transport, transport_message("search backend", res.error()));
  if (res->status != 200) throw Error(ErrorCode::Transport, "search backend returned HTTP " + std::to_string(res->status));
  auto doc = nlohmann::json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("results") || !doc["results"].is_array())
    throw Error(ErrorCode::Transport, "search backend reply has no \"results\" list");
  std::vector<SearchResult> out;
  for (const auto& r : doc["results"]) {
    if (!r.is_object()) continue;
    out.push_back({r.value("title", ""), r.value("url", ""), r.value("published", ""), r.value("snippet", "")});
  }
  return out;
}

bool is_iso_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (text[i] < '0' || text[i] > '9') return false;
  int month = std::stoi(text.substr(5, 2));
  int day = std::stoi(text.substr(8, 2));
  int year = std::stoi(text.substr(0, 4));
  static constexpr int kDays[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12 || day < 1 || day > kDays[month - 1]) return false;
  bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  return !(month == 2 && day == 29 && !leap);
}

std::vector<SearchResult> search(SearchBackend& backend, const std::string& query,
                                 const std::optional<std::string>& cutoff) {
  if (!cutoff || cutoff->empty()) throw Error(ErrorCode::InvalidConfig, "search needs a knowledge cutoff");
  if (!is_iso_date(*cutoff)) throw Error(ErrorCode::InvalidConfig, "cutoff must be YYYY-MM-DD: " + *cutoff);
  std::vector<SearchResult> out;
  for (auto& r : backend.query(query, *cutoff)) {
    // Compare only the date part so timestamps like 2024-05-01T10:00Z pass.
    std::string day = r.published.substr(0, 10);
    if (is_iso_date(day) && day < *cutoff) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace spr
