#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/core/tree.hpp"

namespace spr {

// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

// Directory of content-addressed documents plus an append-only index:
//
//   <root>/objects/<sha256>.json   canonical bytes
//   <root>/index.jsonl             one JSON record per line
//
// References look like "sha256:<64 hex digits>".
class Store {
 public:
  // Creates the directories when missing. Throws Error(Io).
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  // Stores the bytes as given; callers pass canonical text.
  std::string put_text(const std::string& bytes);
  std::string put(const nlohmann::json& doc);  // canonical_dump(doc)
  std::string put_tree(const PropositionTree& tree);

  // Throws Error(NotFound) for unknown refs, Error(InvalidInput) for
  // malformed ones and Error(IntegrityError) when the bytes no longer hash to
  // the reference.
  std::string get_text(const std::string& ref) const;
  nlohmann::json get(const std::string& ref) const;
  PropositionTree get_tree(const std::string& ref) const;
  bool contains(const std::string& ref) const;

  void append_index(const nlohmann::json& record);
  // Records in append order; a torn trailing line is ignored.
  std::vector<nlohmann::json> read_index() const;

  static bool is_ref(std::string_view ref);

 private:
  std::filesystem::path object_path(const std::string& ref) const;

  std::filesystem::path root_;
  mutable std::mutex index_mu_;
};

}  // namespace spr
