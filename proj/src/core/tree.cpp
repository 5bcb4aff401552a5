#include "spr/core/tree.hpp"

#include <chrono>
#include <ctime>
#include <set>

namespace spr {

std::string_view to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::Pending: return "pending";
    case NodeStatus::Expanded: return "expanded";
    case NodeStatus::Grounded: return "grounded";
    case NodeStatus::Synthesized: return "synthesized";
  }
  return "pending";
}

NodeStatus status_from_string(std::string_view text) {
  if (text == "pending") return NodeStatus::Pending;
  if (text == "expanded") return NodeStatus::Expanded;
  if (text == "grounded") return NodeStatus::Grounded;
  if (text == "synthesized") return NodeStatus::Synthesized;
  throw Error(ErrorCode::SchemaMismatch, "unknown node status '" + std::string(text) + "'");
}

PropositionTree::PropositionTree(NodeMap nodes, std::string created_at, nlohmann::json config_snapshot)
    : root_(NodeId::root()),
      nodes_(std::move(nodes)),
      created_at_(std::move(created_at)),
      config_snapshot_(config_snapshot.is_null() ? nlohmann::json::object() : std::move(config_snapshot)) {
  rebuild_parent_index();
}

void PropositionTree::rebuild_parent_index() {
  parent_.clear();
  for (const auto& [id, n] : nodes_)
    for (const auto& c : n.children) parent_.emplace(c, id);
}

const PropositionNode& PropositionTree::node(const NodeId& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::NotFound, "no node " + id.str());
  return it->second;
}

PropositionNode& PropositionTree::node(const NodeId& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::NotFound, "no node " + id.str());
  return it->second;
}

std::optional<NodeId> PropositionTree::parent_of(const NodeId& id) const {
  auto it = parent_.find(id);
  if (it == parent_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeId> PropositionTree::ancestors_of(const NodeId& id) const {
  std::vector<NodeId> out;
  std::set<NodeId> seen{id};
  auto p = parent_of(id);
  while (p && seen.insert(*p).second) {
    out.push_back(*p);
    p = parent_of(*p);
  }
  return out;
}

std::size_t PropositionTree::depth_of(const NodeId& id) const { return ancestors_of(id).size(); }

void PropositionTree::set_grounded(const NodeId& id, double p_true, std::string report, std::string key_factor) {
  PropositionNode& n = node(id);
  n.p_true = p_true;
  n.report = std::move(report);
  n.key_factor = std::move(key_factor);
  n.synthesis.reset();
  n.status = NodeStatus::Grounded;
}

void PropositionTree::set_synthesized(const NodeId& id, double p_true, std::string report, SynthesisRecord record) {
  PropositionNode& n = node(id);
  n.p_true = p_true;
  n.report = std::move(report);
  n.key_factor = key_factor_of(record);
  n.synthesis = std::move(record);
  n.status = NodeStatus::Synthesized;
}

std::string utc_timestamp_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

PropositionTree create_tree(std::string root_statement, std::string created_at) {
  if (root_statement.empty()) throw Error(ErrorCode::InvalidInput, "root statement must not be empty");
  PropositionNode root;
  root.id = NodeId::root();
  root.statement = std::move(root_statement);
  PropositionTree::NodeMap nodes;
  nodes.emplace(root.id, std::move(root));
  return PropositionTree(std::move(nodes), std::move(created_at), nlohmann::json::object());
}

PropositionTree add_children(const PropositionTree& tree, const NodeId& parent, const ChildStatements& children,
                             std::string causality) {
  const PropositionNode& p = tree.node(parent);
  if (p.has_value())
    throw Error(ErrorCode::InvalidInput, "cannot expand " + parent.str() + ": structure is frozen once grounded");
  std::set<NodeId> fresh;
  std::vector<NodeId> ids;
  for (const auto& [text, statement] : children) {
    if (!NodeId::is_valid(text)) throw Error(ErrorCode::IdConflict, "malformed proposition id '" + text + "'", true);
    NodeId id = NodeId::parse(text);
    auto dot = text.rfind('.');
    std::string owner = dot == std::string::npos ? "P0" : text.substr(0, dot);
    if (!id.is_root() && owner != parent.str())
      throw Error(ErrorCode::IdConflict, "proposition id " + text + " does not extend " + parent.str(), true);
    if (id.is_root() || tree.contains(id) || !fresh.insert(id).second)
      throw Error(ErrorCode::IdConflict, "proposition id " + text + " is already in use", true);
    if (statement.empty()) throw Error(ErrorCode::InvalidInput, "empty statement for " + text, true);
    ids.push_back(std::move(id));
  }

  PropositionTree out = tree;
  PropositionNode& target = out.node(parent);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    PropositionNode child;
    child.id = ids[i];
    child.statement = children[i].second;
    target.children.push_back(ids[i]);
    out.parent_.emplace(ids[i], parent);
    out.nodes_.emplace(ids[i], std::move(child));
  }
  target.causality = std::move(causality);
  target.status = NodeStatus::Expanded;
  return out;
}

PropositionTree remove_subtree(const PropositionTree& tree, const NodeId& id) {
  if (id.is_root()) throw Error(ErrorCode::InvalidInput, "the root cannot be removed");
  tree.node(id);
  PropositionTree out = tree;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    NodeId cur = stack.back();
    stack.pop_back();
    auto it = out.nodes_.find(cur);
    if (it == out.nodes_.end()) continue;
    for (const auto& c : it->second.children) stack.push_back(c);
    out.nodes_.erase(it);
  }
  for (auto& [nid, n] : out.nodes_) std::erase(n.children, id);
  out.rebuild_parent_index();
  return out;
}

std::vector<NodeId> leaves(const PropositionTree& tree) {
  std::vector<NodeId> out;
  for (const auto& [id, n] : tree.nodes())
    if (n.is_leaf()) out.push_back(id);
  return out;
}

std::vector<NodeId> internal_nodes(const PropositionTree& tree) {
  std::vector<NodeId> out;
  for (const auto& [id, n] : tree.nodes())
    if (!n.is_leaf()) out.push_back(id);
  return out;
}

ValidationReport validate_tree(const PropositionTree& tree) {
  ValidationReport report;
  auto add = [&](std::string kind, const NodeId& id, std::string msg) {
    report.push_back({std::move(kind), id.str(), std::move(msg)});
  };
  const auto& nodes = tree.nodes();
  if (!tree.contains(NodeId::root())) {
    report.push_back({"missing-root", std::nullopt, "tree has no P0 node"});
    return report;
  }

  std::map<NodeId, int> parents;
  for (const auto& [id, n] : nodes) {
    if (n.id != id) add("id-mismatch", id, "node record carries id " + n.id.str());
    std::set<NodeId> seen;
    for (const auto& c : n.children) {
      if (!seen.insert(c).second) add("duplicate-child", id, "child " + c.str() + " listed twice");
      if (!tree.contains(c)) add("dangling-reference", id, "child " + c.str() + " does not exist");
      ++parents[c];
    }
    if (n.status == NodeStatus::Grounded || n.status == NodeStatus::Synthesized) {
      if (!n.p_true) add("missing-value", id, "status " + std::string(to_string(n.status)) + " without p_true");
    } else if (n.p_true) {
      add("unexpected-value", id, "p_true present on a " + std::string(to_string(n.status)) + " node");
    }
    if (n.p_true && !(*n.p_true >= 0.0 && *n.p_true <= 1.0)) add("value-range", id, "p_true outside [0,1]");
    if (n.status == NodeStatus::Grounded && !n.children.empty())
      add("grounded-internal", id, "grounded node has children");
    if (n.status == NodeStatus::Synthesized) {
      for (const auto& c : n.children) {
        auto it = nodes.find(c);
        if (it != nodes.end() && !it->second.has_value())
          add("unsynthesized-child", id, "child " + c.str() + " has no value");
      }
    }
  }
  for (const auto& [child, count] : parents) {
    if (child.is_root()) add("forest", child, "root listed as a child");
    if (count > 1) add("forest", child, "node has " + std::to_string(count) + " parents");
  }
  // Reachability from P0 also catches cycles detached from the root.
  std::set<NodeId> reached;
  std::vector<NodeId> stack{NodeId::root()};
  while (!stack.empty()) {
    NodeId cur = stack.back();
    stack.pop_back();
    // Shared children and cycles already surface as forest violations.
    if (!reached.insert(cur).second) continue;
    auto it = nodes.find(cur);
    if (it == nodes.end()) continue;
    for (const auto& c : it->second.children) stack.push_back(c);
  }
  for (const auto& [id, n] : nodes)
    if (!reached.count(id)) add("unreachable", id, "node not reachable from P0");
  return report;
}

}  // namespace spr
