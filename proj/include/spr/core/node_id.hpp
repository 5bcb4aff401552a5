#pragma once

#include <compare>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace spr {

// Proposition identifier: "P0" for the root, otherwise "P<n>(.<n>)*".
// Ordering is segment-wise numeric so that P2 sorts before P10.
class NodeId {
 public:
  NodeId() : NodeId(root()) {}

  // Throws Error(InvalidInput) when `text` is not well formed.
  static NodeId parse(std::string_view text);
  static bool is_valid(std::string_view text);
  static NodeId root();

  const std::string& str() const noexcept { return text_; }
  const std::vector<unsigned long>& segments() const noexcept { return segments_; }
  bool is_root() const noexcept { return text_ == "P0"; }

  // Re-homes an id from a sub-run under `host`: P0 -> host, P3.1 -> host.3.1.
  NodeId grafted_under(const NodeId& host) const;

  friend bool operator==(const NodeId& a, const NodeId& b) { return a.text_ == b.text_; }
  friend std::strong_ordering operator<=>(const NodeId& a, const NodeId& b);

 private:
  explicit NodeId(std::string text, std::vector<unsigned long> segments)
      : text_(std::move(text)), segments_(std::move(segments)) {}

  std::string text_;
  std::vector<unsigned long> segments_;
};

}  // namespace spr

template <>
struct std::hash<spr::NodeId> {
  std::size_t operator()(const spr::NodeId& id) const noexcept { return std::hash<std::string>{}(id.str()); }
};
