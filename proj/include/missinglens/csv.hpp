#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "missinglens/table.hpp"

namespace missinglens {

struct CsvOptions {
  char delimiter = ',';
  std::vector<std::string> missing_tokens = {"", "NA", "NaN"};
  std::map<std::string, ColumnKind> schema;  // per-column kind overrides
  std::string target;                        // optional target column name
};

Table load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Table load_csv_string(std::string_view text, const CsvOptions& options = {});

// Observed numeric cells are written with the shortest representation that
// parses back to the identical double; missing cells as the empty token.
void write_csv(const Table& table, const std::filesystem::path& path, char delimiter = ',');
std::string write_csv_string(const Table& table, char delimiter = ',');

// Shortest round-trip formatting for a double (shared with JSON/SVG export).
std::string format_double(double v);

}  // namespace missinglens
