#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace medfab {

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Fills {name} placeholders. Only brace groups that look like identifiers
/// are placeholders, so literal JSON braces in a template pass through.
/// Throws ConfigError when a placeholder has no value.
std::string render_template(std::string_view tmpl, const TemplateVars& vars);

/// Named prompt templates. The compiled-in set can be overridden per file
/// by "<name>.prompt" files in a templates directory.
///
/// Each template holds a system part and a user part separated by a line
/// containing only "---".
class PromptLibrary {
 public:
  PromptLibrary();  // built-in templates only
  explicit PromptLibrary(const std::filesystem::path& override_dir);

  struct Rendered {
    std::string system;
    std::string user;
  };

  Rendered render(std::string_view name, const TemplateVars& vars) const;
  const std::string& raw(std::string_view name) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

/// Function words excluded from masking, one per line ('#' comments).
class Stopwords {
 public:
  Stopwords();  // built-in list
  explicit Stopwords(const std::filesystem::path& file);

  bool contains(std::string_view token) const { return words_.contains(token); }
  std::size_t size() const { return words_.size(); }

 private:
  void parse(std::string_view text);

  std::set<std::string, std::less<>> words_;
};

}  // namespace medfab
