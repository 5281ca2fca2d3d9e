#include "medfab/prompts.hpp"

#include <cctype>
#include <utility>

#include "medfab/errors.hpp"
#include "medfab/sample.hpp"
#include "medfab/text_metrics.hpp"

namespace medfab {

namespace {

#include "medfab/builtin_data.inc"

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

}  // namespace

std::string render_template(std::string_view tmpl, const TemplateVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const auto name = tmpl.substr(open + 1, close - open - 1);
    if (!is_identifier(name)) {
      out += '{';
      pos = open + 1;
      continue;
    }
    auto it = vars.find(name);
    if (it == vars.end()) throw ConfigError("template placeholder {" + std::string(name) + "} has no value");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

PromptLibrary::PromptLibrary() {
  for (const auto& [name, body] : kBuiltinTemplates) templates_.emplace(name, body);
}

PromptLibrary::PromptLibrary(const std::filesystem::path& override_dir) : PromptLibrary() {
  if (override_dir.empty()) return;
  if (!std::filesystem::is_directory(override_dir)) {
    throw ConfigError("templates directory '" + override_dir.string() + "' does not exist");
  }
  for (const auto& entry : std::filesystem::directory_iterator(override_dir)) {
    if (entry.path().extension() != ".prompt") continue;
    templates_[entry.path().stem().string()] = read_text_file(entry.path());
  }
}

const std::string& PromptLibrary::raw(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("no prompt template named '" + std::string(name) + "'");
  return it->second;
}

PromptLibrary::Rendered PromptLibrary::render(std::string_view name, const TemplateVars& vars) const {
  const std::string& body = raw(name);
  std::string_view system, user;
  const std::string_view view(body);
  auto sep = view.find("\n---\n");
  if (sep == std::string_view::npos) {
    user = view;
  } else {
    system = view.substr(0, sep);
    user = view.substr(sep + 5);
  }
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return std::string();
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
  };
  return {trim(render_template(system, vars)), trim(render_template(user, vars))};
}

Stopwords::Stopwords() { parse(kBuiltinStopwords); }

Stopwords::Stopwords(const std::filesystem::path& file) { parse(read_text_file(file)); }

void Stopwords::parse(std::string_view text) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    // Normalise through the tokenizer so entries match token spelling.
    for (auto& token : tokenize(line).tokens) words_.insert(std::move(token));
    pos = end + 1;
  }
}

}  // namespace medfab
