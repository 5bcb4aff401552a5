#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "spr/core/tree.hpp"

namespace spr {

// Rounds to 12 significant digits, the precision of canonical documents.
double canonical_number(double value);

// Rounds every floating-point number in `doc` in place.
void canonicalize_numbers(nlohmann::json& doc);

// Canonical text: sorted keys, 2-space indent, trailing newline.
std::string canonical_dump(nlohmann::json doc);

nlohmann::json tree_to_document(const PropositionTree& tree);
// Throws Error(SchemaMismatch); does not validate tree invariants.
PropositionTree tree_from_document(const nlohmann::json& doc);

std::string serialize_tree(const PropositionTree& tree);
PropositionTree deserialize_tree(std::string_view text);

}  // namespace spr
