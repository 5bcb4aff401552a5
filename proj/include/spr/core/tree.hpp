#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/core/node_id.hpp"
#include "spr/error.hpp"
#include "spr/synthesis/record.hpp"

namespace spr {

enum class NodeStatus { Pending, Expanded, Grounded, Synthesized };

std::string_view to_string(NodeStatus status);
NodeStatus status_from_string(std::string_view text);

struct PropositionNode {
  NodeId id;
  std::string statement;
  std::optional<double> p_true;
  std::optional<std::string> report;
  std::optional<std::string> key_factor;
  std::vector<NodeId> children;  // analyzer emission order
  std::optional<std::string> causality;
  std::optional<SynthesisRecord> synthesis;
  NodeStatus status = NodeStatus::Pending;

  bool is_leaf() const noexcept { return children.empty(); }
  bool has_value() const noexcept { return status == NodeStatus::Grounded || status == NodeStatus::Synthesized; }

  friend bool operator==(const PropositionNode&, const PropositionNode&) = default;
};

// Ordered (emission order) list of new children: id -> statement.
using ChildStatements = std::vector<std::pair<std::string, std::string>>;

// The reasoning state rooted at P0. Values are copied freely; structural
// changes go through add_children, which returns a new tree.
class PropositionTree {
 public:
  using NodeMap = std::map<NodeId, PropositionNode>;

  // Unchecked assembly, used by the document loader; see validate_tree.
  PropositionTree(NodeMap nodes, std::string created_at, nlohmann::json config_snapshot);

  const NodeId& root() const noexcept { return root_; }
  const NodeMap& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool contains(const NodeId& id) const { return nodes_.count(id) != 0; }

  // Throws Error(NotFound).
  const PropositionNode& node(const NodeId& id) const;
  PropositionNode& node(const NodeId& id);

  // First parent found listing `id`, if any.
  std::optional<NodeId> parent_of(const NodeId& id) const;
  // Proper ancestors, nearest first.
  std::vector<NodeId> ancestors_of(const NodeId& id) const;
  std::size_t depth_of(const NodeId& id) const;

  const std::string& created_at() const noexcept { return created_at_; }
  const nlohmann::json& config_snapshot() const noexcept { return config_snapshot_; }
  void set_config_snapshot(nlohmann::json snapshot) { config_snapshot_ = std::move(snapshot); }

  // Value updates (no structural change).
  void set_grounded(const NodeId& id, double p_true, std::string report, std::string key_factor);
  void set_synthesized(const NodeId& id, double p_true, std::string report, SynthesisRecord record);

  friend bool operator==(const PropositionTree&, const PropositionTree&) = default;

 private:
  friend PropositionTree add_children(const PropositionTree&, const NodeId&, const ChildStatements&, std::string);
  friend PropositionTree remove_subtree(const PropositionTree&, const NodeId&);
  void rebuild_parent_index();

  NodeId root_;
  NodeMap nodes_;
  std::map<NodeId, NodeId> parent_;
  std::string created_at_;
  nlohmann::json config_snapshot_;
};

std::string utc_timestamp_now();

// Throws Error(InvalidInput) on an empty statement.
PropositionTree create_tree(std::string root_statement, std::string created_at = utc_timestamp_now());

// Appends children in the given order and marks the parent expanded.
// Errors: NotFound (parent), IdConflict (duplicate or malformed id),
// InvalidInput (parent already grounded/synthesized: structure is frozen).
PropositionTree add_children(const PropositionTree& tree, const NodeId& parent, const ChildStatements& children,
                             std::string causality);

// Drops `id` and its descendants. Used by what-if sessions only.
PropositionTree remove_subtree(const PropositionTree& tree, const NodeId& id);

// Nodes with no children, id-sorted.
std::vector<NodeId> leaves(const PropositionTree& tree);
// Nodes with children, id-sorted.
std::vector<NodeId> internal_nodes(const PropositionTree& tree);

// Empty iff every node and tree invariant holds.
ValidationReport validate_tree(const PropositionTree& tree);

}  // namespace spr
