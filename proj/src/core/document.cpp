#include "spr/core/document.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace spr {

double canonical_number(double value) {
  if (!std::isfinite(value)) return value;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  double out = std::strtod(buf, nullptr);
  return out == 0.0 ? 0.0 : out;  // drop negative zero
}

void canonicalize_numbers(nlohmann::json& doc) {
  if (doc.is_number_float()) {
    doc = canonical_number(doc.get<double>());
  } else if (doc.is_structured()) {
    for (auto& child : doc) canonicalize_numbers(child);
  }
}

std::string canonical_dump(nlohmann::json doc) {
  canonicalize_numbers(doc);
  return doc.dump(2) + "\n";
}

namespace {

nlohmann::json optional_text(const std::optional<std::string>& s) {
  return s ? nlohmann::json(*s) : nlohmann::json(nullptr);
}

std::optional<std::string> read_optional_text(const nlohmann::json& n, const char* key) {
  auto it = n.find(key);
  if (it == n.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorCode::SchemaMismatch, std::string("\"") + key + "\" must be a string or null");
  return it->get<std::string>();
}

}  // namespace

nlohmann::json tree_to_document(const PropositionTree& tree) {
  nlohmann::json nodes = nlohmann::json::object();
  for (const auto& [id, n] : tree.nodes()) {
    nlohmann::json children = nlohmann::json::array();
    for (const auto& c : n.children) children.push_back(c.str());
    nodes[id.str()] = {
        {"statement", n.statement},
        {"p_true", n.p_true ? nlohmann::json(*n.p_true) : nlohmann::json(nullptr)},
        {"report", optional_text(n.report)},
        {"key_factor", optional_text(n.key_factor)},
        {"children", std::move(children)},
        {"causality", optional_text(n.causality)},
        {"status", std::string(to_string(n.status))},
        {"synthesis", n.synthesis ? record_to_json(*n.synthesis) : nlohmann::json(nullptr)},
    };
  }
  return {
      {"root", tree.root().str()},
      {"nodes", std::move(nodes)},
      {"created_at", tree.created_at()},
      {"config_snapshot", tree.config_snapshot()},
  };
}

PropositionTree tree_from_document(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaMismatch, "tree document must be an object");
  if (doc.value("root", std::string()) != "P0") throw Error(ErrorCode::SchemaMismatch, "tree root must be \"P0\"");
  auto nodes_it = doc.find("nodes");
  if (nodes_it == doc.end() || !nodes_it->is_object())
    throw Error(ErrorCode::SchemaMismatch, "tree document needs a \"nodes\" object");

  PropositionTree::NodeMap nodes;
  for (const auto& [key, n] : nodes_it->items()) {
    if (!NodeId::is_valid(key)) throw Error(ErrorCode::SchemaMismatch, "bad node id '" + key + "'");
    if (!n.is_object()) throw Error(ErrorCode::SchemaMismatch, "node " + key + " must be an object");
    PropositionNode node;
    node.id = NodeId::parse(key);
    if (!n.contains("statement") || !n["statement"].is_string())
      throw Error(ErrorCode::SchemaMismatch, "node " + key + " needs a string statement");
    node.statement = n["statement"].get<std::string>();
    if (auto it = n.find("p_true"); it != n.end() && !it->is_null()) {
      if (!it->is_number()) throw Error(ErrorCode::SchemaMismatch, "node " + key + " p_true must be a number");
      node.p_true = it->get<double>();
    }
    node.report = read_optional_text(n, "report");
    node.key_factor = read_optional_text(n, "key_factor");
    node.causality = read_optional_text(n, "causality");
    if (auto it = n.find("children"); it != n.end()) {
      if (!it->is_array()) throw Error(ErrorCode::SchemaMismatch, "node " + key + " children must be an array");
      for (const auto& c : *it) {
        if (!c.is_string() || !NodeId::is_valid(c.get<std::string>()))
          throw Error(ErrorCode::SchemaMismatch, "node " + key + " has a malformed child id");
        node.children.push_back(NodeId::parse(c.get<std::string>()));
      }
    }
    node.status = status_from_string(n.value("status", std::string("pending")));
    if (auto it = n.find("synthesis"); it != n.end() && !it->is_null()) node.synthesis = record_from_json(*it);
    nodes.emplace(node.id, std::move(node));
  }
  std::string created_at = doc.value("created_at", std::string());
  nlohmann::json snapshot = doc.contains("config_snapshot") ? doc["config_snapshot"] : nlohmann::json::object();
  return PropositionTree(std::move(nodes), std::move(created_at), std::move(snapshot));
}

std::string serialize_tree(const PropositionTree& tree) { return canonical_dump(tree_to_document(tree)); }

PropositionTree deserialize_tree(std::string_view text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::SchemaMismatch, "tree document is not valid JSON");
  return tree_from_document(doc);
}

}  // namespace spr
