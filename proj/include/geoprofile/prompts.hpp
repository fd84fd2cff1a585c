#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace geoprofile {

enum class PromptKind { kZeroShot, kExtract, kPredict, kIcl, kTranslate };

// Stable identifier used in cache keys and reports: "zero_shot", "extract",
// "predict", "icl", "translate".
std::string_view template_id(PromptKind kind);
PromptKind prompt_kind_from_id(std::string_view id);

using SlotMap = std::map<std::string, std::string, std::less<>>;

// A prompt with `{name}` placeholders (lowercase letters and underscores).
// Any other brace is literal text.
class PromptTemplate {
 public:
  PromptTemplate(std::string id, std::string text);

  const std::string& id() const { return id_; }
  const std::string& text() const { return text_; }
  const std::string& checksum() const { return checksum_; }
  // Distinct placeholder names in order of first appearance.
  const std::vector<std::string>& placeholders() const { return placeholders_; }

  // Substitutes every placeholder in one pass; slot values are copied
  // byte-for-byte and never re-scanned. Throws TemplateError when a
  // placeholder has no slot or an empty one. Extra slots are ignored.
  std::string render(const SlotMap& slots) const;

 private:
  struct Segment {
    bool slot = false;
    std::string value;  // literal text or placeholder name
  };

  std::string id_;
  std::string text_;
  std::string checksum_;
  std::vector<std::string> placeholders_;
  std::vector<Segment> segments_;
};

class PromptLibrary {
 public:
  // The shipped templates.
  static const PromptLibrary& builtin();

  const PromptTemplate& get(PromptKind kind) const;
  std::string render(PromptKind kind, const SlotMap& slots) const { return get(kind).render(slots); }

  // template id -> sha256 of the template text.
  std::map<std::string, std::string> checksums() const;

 private:
  PromptLibrary();
  std::vector<PromptTemplate> templates_;
};

std::string render_prompt(PromptKind kind, const SlotMap& slots);

}  // namespace geoprofile
