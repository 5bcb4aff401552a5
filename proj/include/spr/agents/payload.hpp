#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spr/core/tree.hpp"
#include "spr/synthesis/record.hpp"

namespace spr {

struct FencedPayload {
  nlohmann::ordered_json payload;  // key order as emitted
  std::string report;              // response text with the payload block removed
};

// Parses the last ```json fenced block. Throws retryable MissingPayload or
// PayloadSyntax; never anything else.
FencedPayload extract_fenced_payload(std::string_view response_text);

struct GrounderOutput {
  std::string report;
  double p_true = 0.0;
  std::string key_factor;
};

struct Expansion {
  std::string parent;
  ChildStatements children;  // emission order
  std::string causality;
};

struct AnalyzerOutput {
  std::vector<Expansion> expansions;
};

struct SynthesizerOutput {
  SynthesisRecord record;
  std::string report;
  std::optional<double> p_true;  // vanilla only
};

GrounderOutput parse_grounder_output(std::string_view text);
AnalyzerOutput parse_analyzer_output(std::string_view text);

// Validates the payload against the rule's schema and the child set; every
// failure is retryable (SchemaMismatch, CoefficientError or ParseError).
SynthesizerOutput parse_synthesizer_output(std::string_view text, RuleKind rule, const std::set<NodeId>& child_ids,
                                           double intercept_bound = kDefaultInterceptBound);

// Applies the expansions to `tree` in order (the AnalyzerOutput invariant).
PropositionTree apply_expansions(const PropositionTree& tree, const AnalyzerOutput& output);

}  // namespace spr
