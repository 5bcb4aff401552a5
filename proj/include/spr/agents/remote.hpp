#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spr/agents/agent.hpp"

namespace spr {

// Splits "http://host:port/path" into its parts. Only plain http is
// supported. Throws Error(InvalidConfig).
struct Endpoint {
  std::string host;
  int port = 80;
  std::string path;  // without trailing '/'

  static Endpoint parse(const std::string& locator);
};

// Chat-completion client. POSTs {"model","temperature","messages"} to the
// endpoint and expects {"content": "..."} back. Calls to the same
// endpoint are capped at config.max_concurrent_calls in flight.
class RemoteChatAgent final : public Agent {
 public:
  explicit RemoteChatAgent(AgentConfig config);
  ~RemoteChatAgent() override;

  std::string complete(const AgentRequest& request) override;
  const AgentConfig& config() const noexcept { return config_; }

  struct Gate;

 private:
  AgentConfig config_;
  Endpoint endpoint_;
  std::shared_ptr<Gate> gate_;
};

struct SearchResult {
  std::string title;
  std::string url;
  std::string published;  // YYYY-MM-DD
  std::string snippet;
};

class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual std::vector<SearchResult> query(const std::string& query, const std::string& cutoff) = 0;
};

// GET <endpoint>?q=...&before=<cutoff>, expecting
// {"results":[{title,url,published,snippet}]}.
class HttpSearchBackend final : public SearchBackend {
 public:
  explicit HttpSearchBackend(const std::string& endpoint);
  // Reads SEARCH_ENDPOINT. Throws Error(InvalidConfig) when unset.
  static HttpSearchBackend from_env();
  std::vector<SearchResult> query(const std::string& query, const std::string& cutoff) override;

 private:
  Endpoint endpoint_;
};

// Queries the backend and drops every result not published strictly before
// the cutoff, including results with unreadable dates. An unset cutoff throws
// Error(InvalidConfig).
std::vector<SearchResult> search(SearchBackend& backend, const std::string& query,
                                 const std::optional<std::string>& cutoff);

// True for a well-formed YYYY-MM-DD calendar date.
bool is_iso_date(const std::string& text);

}  // namespace spr
