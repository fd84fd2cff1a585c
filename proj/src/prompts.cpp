#include "geoprofile/prompts.hpp"

#include <algorithm>
#include <array>

#include "geoprofile/assets.hpp"
#include "geoprofile/checksum.hpp"
#include "geoprofile/error.hpp"

namespace geoprofile {
namespace {

constexpr std::array<std::pair<PromptKind, std::string_view>, 5> kIds{{
    {PromptKind::kZeroShot, "zero_shot"},
    {PromptKind::kExtract, "extract"},
    {PromptKind::kPredict, "predict"},
    {PromptKind::kIcl, "icl"},
    {PromptKind::kTranslate, "translate"},
}};

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

}  // namespace

std::string_view template_id(PromptKind kind) {
  for (const auto& [k, id] : kIds) {
    if (k == kind) return id;
  }
  throw LookupError("unknown prompt kind");
}

PromptKind prompt_kind_from_id(std::string_view id) {
  for (const auto& [k, name] : kIds) {
    if (name == id) return k;
  }
  throw LookupError("unknown prompt template id: " + std::string(id));
}

PromptTemplate::PromptTemplate(std::string id, std::string text)
    : id_(std::move(id)), text_(std::move(text)), checksum_(sha256_hex(text_)) {
  std::string literal;
  std::size_t i = 0;
  while (i < text_.size()) {
    if (text_[i] == '{') {
      std::size_t j = i + 1;
      while (j < text_.size() && is_slot_char(text_[j])) ++j;
      if (j > i + 1 && j < text_.size() && text_[j] == '}') {
        if (!literal.empty()) segments_.push_back({false, std::move(literal)});
        literal.clear();
        std::string name = text_.substr(i + 1, j - i - 1);
        if (std::find(placeholders_.begin(), placeholders_.end(), name) == placeholders_.end()) {
          placeholders_.push_back(name);
        }
        segments_.push_back({true, std::move(name)});
        i = j + 1;
        continue;
      }
    }
    literal.push_back(text_[i++]);
  }
  if (!literal.empty()) segments_.push_back({false, std::move(literal)});
}

std::string PromptTemplate::render(const SlotMap& slots) const {
  for (const auto& name : placeholders_) {
    const auto it = slots.find(name);
    if (it == slots.end()) throw TemplateError("template '" + id_ + "' is missing slot {" + name + "}");
    if (it->second.empty()) throw TemplateError("template '" + id_ + "' got an empty slot {" + name + "}");
  }
  std::string out;
  out.reserve(text_.size() + 256);
  for (const auto& seg : segments_) {
    out += seg.slot ? slots.find(seg.value)->second : seg.value;
  }
  return out;
}

PromptLibrary::PromptLibrary() {
  for (const auto& [kind, id] : kIds) {
    templates_.emplace_back(std::string(id), std::string(assets::get("prompts/" + std::string(id) + ".txt")));
  }
}

const PromptLibrary& PromptLibrary::builtin() {
  static const PromptLibrary library;
  return library;
}

const PromptTemplate& PromptLibrary::get(PromptKind kind) const {
  return templates_.at(static_cast<std::size_t>(kind));
}

std::map<std::string, std::string> PromptLibrary::checksums() const {
  std::map<std::string, std::string> out;
  for (const auto& t : templates_) out.emplace(t.id(), t.checksum());
  return out;
}

std::string render_prompt(PromptKind kind, const SlotMap& slots) {
  return PromptLibrary::builtin().render(kind, slots);
}

}  // namespace geoprofile
