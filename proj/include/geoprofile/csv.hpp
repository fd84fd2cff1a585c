#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace geoprofile::csv {

// RFC 4180 field splitting for a single line (no embedded newlines).
std::vector<std::string> split_line(std::string_view line);

// Quotes a field when it contains a comma, quote or leading/trailing space.
std::string escape(std::string_view field);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Position of a header column; throws FormatError when absent.
  std::size_t column(std::string_view name) const;
};

// Reads a headed CSV. Blank lines are skipped; rows with a field count
// different from the header are a FormatError naming the line.
Table read(std::istream& in, std::string_view source_name = "<stream>");
Table read_file(const std::filesystem::path& path);

}  // namespace geoprofile::csv
