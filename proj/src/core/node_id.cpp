#include "spr/core/node_id.hpp"

#include <charconv>

#include "spr/error.hpp"

namespace spr {
namespace {

bool split_segments(std::string_view text, std::vector<unsigned long>& out) {
  if (text.size() < 2 || text[0] != 'P') return false;
  std::string_view rest = text.substr(1);
  while (true) {
    auto dot = rest.find('.');
    std::string_view part = rest.substr(0, dot);
    if (part.empty() || (part.size() > 1 && part[0] == '0')) return false;
    for (char c : part)
      if (c < '0' || c > '9') return false;
    unsigned long value = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc{} || ptr != part.data() + part.size()) return false;
    out.push_back(value);
    if (dot == std::string_view::npos) break;
    rest = rest.substr(dot + 1);
  }
  // "P0" is only valid on its own; "P0.1" is not part of the scheme.
  if (out.front() == 0 && out.size() > 1) return false;
  return true;
}

}  // namespace

bool NodeId::is_valid(std::string_view text) {
  std::vector<unsigned long> segments;
  return split_segments(text, segments);
}

NodeId NodeId::parse(std::string_view text) {
  std::vector<unsigned long> segments;
  if (!split_segments(text, segments))
    throw Error(ErrorCode::InvalidInput, "malformed proposition id '" + std::string(text) + "'");
  return NodeId(std::string(text), std::move(segments));
}

NodeId NodeId::root() { return NodeId("P0", {0}); }

NodeId NodeId::grafted_under(const NodeId& host) const {
  if (is_root()) return host;
  if (host.is_root()) return *this;
  std::string text = host.text_;
  std::vector<unsigned long> segments = host.segments_;
  for (unsigned long s : segments_) {
    text += "." + std::to_string(s);
    segments.push_back(s);
  }
  return NodeId(std::move(text), std::move(segments));
}

std::strong_ordering operator<=>(const NodeId& a, const NodeId& b) {
  return std::lexicographical_compare_three_way(a.segments_.begin(), a.segments_.end(), b.segments_.begin(),
                                                b.segments_.end());
}

}  // namespace spr
