#include "spr/agents/prompts.hpp"

#include "spr/error.hpp"

namespace spr {
namespace detail {
const std::map<std::string, std::string>& embedded_prompts();
}

std::string render_template(std::string_view text, const PromptBindings& bindings) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '{') {
      if (i + 1 < text.size() && text[i + 1] == '{') {
        out += '{';
        ++i;
        continue;
      }
      auto close = text.find('}', i + 1);
      if (close == std::string_view::npos)
        throw Error(ErrorCode::TemplateError, "unterminated placeholder at offset " + std::to_string(i));
      std::string_view name = text.substr(i + 1, close - i - 1);
      auto it = bindings.find(name);
      if (it == bindings.end()) throw Error(ErrorCode::TemplateError, "no binding for {" + std::string(name) + "}");
      out += it->second;
      i = close;
    } else if (c == '}') {
      if (i + 1 < text.size() && text[i + 1] == '}') ++i;
      else throw Error(ErrorCode::TemplateError, "stray '}' at offset " + std::to_string(i));
      out += '}';
    } else {
      out += c;
    }
  }
  return out;
}

const std::string& prompt_template(std::string_view id) {
  const auto& table = detail::embedded_prompts();
  auto it = table.find(std::string(id));
  if (it == table.end()) throw Error(ErrorCode::TemplateError, "unknown template '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> prompt_template_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, text] : detail::embedded_prompts()) ids.push_back(id);
  return ids;
}

std::string render_prompt(std::string_view template_id, const PromptBindings& bindings) {
  return render_template(prompt_template(template_id), bindings);
}

}  // namespace spr
