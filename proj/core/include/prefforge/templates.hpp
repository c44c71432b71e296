#ifndef PREFFORGE_TEMPLATES_HPP_
#define PREFFORGE_TEMPLATES_HPP_

#include <map>
#include <string>
#include <string_view>

namespace prefforge {

// Prompt templates are opaque text assets keyed by name. The built-in
// defaults cover the three pipeline roles ("decompose", "score", "verify");
// a directory of <name>.txt files can override or extend them.

class TemplateRegistry {
 public:
  static TemplateRegistry with_defaults();

  void set(std::string name, std::string text);
  void load_directory(const std::string& dir);

  /// Throws Error{unknown_key} for an unregistered name.
  const std::string& get(std::string_view name) const;
  bool contains(std::string_view name) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

/// Substitutes {{KEY}} placeholders verbatim with values from `vars`.
/// Placeholders without a binding are left untouched.
std::string render_template(std::string_view text,
                            const std::map<std::string, std::string>& vars);

}  // namespace prefforge

#endif  // PREFFORGE_TEMPLATES_HPP_
