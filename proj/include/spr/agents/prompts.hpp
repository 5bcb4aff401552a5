#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace spr {

using PromptBindings = std::map<std::string, std::string, std::less<>>;

// Substitutes {name} placeholders; "{{" and "}}" are literal braces.
// Unbound or malformed placeholders throw Error(TemplateError).
std::string render_template(std::string_view text, const PromptBindings& bindings);

// Shipped templates: analyzer, grounder, synthesizer_vanilla,
// synthesizer_linear, synthesizer_simple_logic, synthesizer_noisy_or,
// retry_feedback.
const std::string& prompt_template(std::string_view id);
std::vector<std::string> prompt_template_ids();

std::string render_prompt(std::string_view template_id, const PromptBindings& bindings);

}  // namespace spr
