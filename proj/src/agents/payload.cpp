#include "spr/agents/payload.hpp"

#include <cctype>
#include <cmath>

#include "spr/synthesis/rules.hpp"

namespace spr {
namespace {

bool label_is_json(std::string_view text, std::size_t pos) {
  static constexpr std::string_view kLabel = "json";
  if (pos + kLabel.size() > text.size()) return false;
  for (std::size_t i = 0; i < kLabel.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != kLabel[i]) return false;
  std::size_t after = pos + kLabel.size();
  return after == text.size() || std::isspace(static_cast<unsigned char>(text[after]));
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

Error retryable(ErrorCode code, const std::string& msg) { return Error(code, msg, true); }

nlohmann::json plain(const nlohmann::ordered_json& j) { return nlohmann::json::parse(j.dump()); }

std::string key_factor_from(const nlohmann::ordered_json& payload) {
  auto it = payload.find("key_factor");
  if (it == payload.end() || it->is_null()) return {};
  if (!it->is_string()) throw retryable(ErrorCode::SchemaMismatch, "\"key_factor\" must be a string");
  return it->get<std::string>();
}

void require_exact_children(const LinearRecord& record, const std::set<NodeId>& child_ids) {
  for (const auto& id : child_ids)
    if (!record.betas.count(id)) throw retryable(ErrorCode::SchemaMismatch, "beta map is missing child " + id.str());
  for (const auto& [id, b] : record.betas)
    if (!child_ids.count(id)) throw retryable(ErrorCode::SchemaMismatch, "beta map names unknown child " + id.str());
}

}  // namespace

FencedPayload extract_fenced_payload(std::string_view text) {
  std::size_t open = std::string_view::npos;
  std::size_t body_begin = 0, body_end = 0, block_end = 0;
  std::size_t pos = 0;
  // Scan every fence; remember the last one labelled json.
  while ((pos = text.find("```", pos)) != std::string_view::npos) {
    std::size_t label = pos + 3;
    if (!label_is_json(text, label)) {
      // Skip over a non-json block entirely.
      auto close = text.find("```", label);
      if (close == std::string_view::npos) break;
      pos = close + 3;
      continue;
    }
    std::size_t begin = label + 4;
    auto close = text.find("```", begin);
    if (close == std::string_view::npos)
      throw retryable(ErrorCode::PayloadSyntax, "unterminated ```json block");
    open = pos;
    body_begin = begin;
    body_end = close;
    block_end = close + 3;
    pos = block_end;
  }
  if (open == std::string_view::npos) throw retryable(ErrorCode::MissingPayload, "no ```json block in response");

  FencedPayload out;
  out.payload = nlohmann::ordered_json::parse(text.substr(body_begin, body_end - body_begin), nullptr, false,
                                              /*ignore_comments=*/true);
  if (out.payload.is_discarded()) throw retryable(ErrorCode::PayloadSyntax, "payload is not valid JSON");
  std::string report(text.substr(0, open));
  report += text.substr(block_end);
  out.report = trim(report);
  return out;
}

GrounderOutput parse_grounder_output(std::string_view text) {
  FencedPayload fp = extract_fenced_payload(text);
  if (!fp.payload.is_object()) throw retryable(ErrorCode::SchemaMismatch, "grounder payload must be an object");
  auto it = fp.payload.find("p_true");
  if (it == fp.payload.end() || !it->is_number())
    throw retryable(ErrorCode::SchemaMismatch, "grounder payload needs a numeric \"p_true\"");
  GrounderOutput out;
  out.p_true = it->get<double>();
  if (!(out.p_true >= 0.0 && out.p_true <= 1.0))
    throw retryable(ErrorCode::SchemaMismatch, "\"p_true\" must lie between 0 and 1");
  out.key_factor = key_factor_from(fp.payload);
  out.report = std::move(fp.report);
  return out;
}

AnalyzerOutput parse_analyzer_output(std::string_view text) {
  FencedPayload fp = extract_fenced_payload(text);
  const auto& p = fp.payload;
  if (!p.is_array()) throw retryable(ErrorCode::SchemaMismatch, "analyzer payload must be a list of expansions");
  AnalyzerOutput out;
  for (const auto& e : p) {
    if (!e.is_object() || !e.contains("parent") || !e["parent"].is_string())
      throw retryable(ErrorCode::SchemaMismatch, "each expansion needs a string \"parent\"");
    Expansion x;
    x.parent = e["parent"].get<std::string>();
    auto ch = e.find("children");
    if (ch == e.end() || !ch->is_object())
      throw retryable(ErrorCode::SchemaMismatch, "expansion of " + x.parent + " needs a \"children\" object");
    for (const auto& [id, stmt] : ch->items()) {
      if (!stmt.is_string()) throw retryable(ErrorCode::SchemaMismatch, "child " + id + " must map to a statement");
      x.children.emplace_back(id, stmt.get<std::string>());
    }
    if (auto c = e.find("causality"); c != e.end() && c->is_string()) x.causality = c->get<std::string>();
    out.expansions.push_back(std::move(x));
  }
  return out;
}

SynthesizerOutput parse_synthesizer_output(std::string_view text, RuleKind rule, const std::set<NodeId>& child_ids,
                                           double intercept_bound) {
  SynthesizerOutput out;
  if (rule == RuleKind::Average) {
    out.record = AverageRecord{};
    out.report = trim(text);
    return out;
  }
  FencedPayload fp = extract_fenced_payload(text);
  const auto& p = fp.payload;
  if (!p.is_object()) throw retryable(ErrorCode::SchemaMismatch, "synthesizer payload must be an object");
  out.report = std::move(fp.report);
  std::string key_factor = key_factor_from(p);

  switch (rule) {
    case RuleKind::Vanilla: {
      auto it = p.find("p_true");
      if (it == p.end() || !it->is_number())
        throw retryable(ErrorCode::SchemaMismatch, "vanilla payload needs a numeric \"p_true\"");
      double v = it->get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw retryable(ErrorCode::SchemaMismatch, "\"p_true\" must lie between 0 and 1");
      out.p_true = v;
      out.record = VanillaRecord{key_factor};
      return out;
    }
    case RuleKind::Linear:
    case RuleKind::NoisyOr: {
      auto it = p.find("beta");
      if (it == p.end()) throw retryable(ErrorCode::SchemaMismatch, "payload needs a \"beta\" object");
      LinearRecord record = linear_from_beta_map(plain(*it), key_factor);
      require_exact_children(record, child_ids);
      if (rule == RuleKind::Linear) {
        if (!(std::abs(record.beta0) <= intercept_bound))
          throw retryable(ErrorCode::CoefficientError,
                          "|beta_0| must be at most " + std::to_string(intercept_bound));
        for (const auto& [id, b] : record.betas)
          if (!(std::abs(b) < 1.0))
            throw retryable(ErrorCode::CoefficientError, "|beta| of " + id.str() + " must be below 1");
        out.record = std::move(record);
      } else {
        if (!(record.beta0 >= 0.0 && record.beta0 <= 1.0))
          throw retryable(ErrorCode::CoefficientError, "beta_0 must lie in [0,1]");
        for (const auto& [id, b] : record.betas)
          if (!(b >= 0.0 && b <= 1.0))
            throw retryable(ErrorCode::CoefficientError, "beta of " + id.str() + " must lie in [0,1]");
        out.record = NoisyOrRecord{std::move(record)};
      }
      return out;
    }
    case RuleKind::SimpleLogic: {
      nlohmann::json doc = plain(p);
      doc["rule"] = "simple_logic";
      LogicRecord record;
      try {
        record = std::get<LogicRecord>(record_from_json(doc));
      } catch (const Error& e) {
        if (e.retryable()) throw;
        throw retryable(ErrorCode::SchemaMismatch, e.what());
      }
      if (!doc.contains("assumption") && formula_variables(record.formula).count(std::string(kAssumptionVariable)))
        throw retryable(ErrorCode::SchemaMismatch, "formula uses PA but no \"assumption\" was given");
      auto problems = validate_logic(record, child_ids);
      if (!problems.empty()) {
        std::string msg;
        for (const auto& v : problems) msg += (msg.empty() ? "" : "; ") + v.kind + ": " + v.message;
        throw retryable(ErrorCode::SchemaMismatch, msg);
      }
      out.record = std::move(record);
      return out;
    }
    case RuleKind::Average:
      break;
  }
  return out;
}

PropositionTree apply_expansions(const PropositionTree& tree, const AnalyzerOutput& output) {
  PropositionTree out = tree;
  for (const auto& e : output.expansions) {
    if (!NodeId::is_valid(e.parent))
      throw Error(ErrorCode::IdConflict, "expansion parent '" + e.parent + "' is not a proposition id", true);
    NodeId parent = NodeId::parse(e.parent);
    if (!out.contains(parent))
      throw Error(ErrorCode::IdConflict, "expansion parent " + e.parent + " does not exist", true);
    out = add_children(out, parent, e.children, e.causality);
  }
  return out;
}

}  // namespace spr
