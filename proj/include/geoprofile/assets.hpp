#pragma once

#include <string_view>

namespace geoprofile::assets {

// Returns the content of a file shipped under assets/, e.g.
// "prompts/extract.txt" or "countries.csv". Throws LookupError for unknown
// names.
std::string_view get(std::string_view name);

}  // namespace geoprofile::assets
