#include "missinglens/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace missinglens {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

bool parse_number(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

// Splits one logical CSV record honoring quotes; consumes the record's lines
// from `pos` (quoted fields may span newlines).
bool next_record(std::string_view text, std::size_t& pos, char delim,
                 std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  while (pos < text.size()) {
    const char c = text[pos];
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
        } else {
          in_quotes = false;
          ++pos;
        }
      } else {
        if (c == '\n') ++line_no;
        field.push_back(c);
        ++pos;
      }
    } else if (c == '"') {
      in_quotes = true;
      ++pos;
    } else if (c == delim) {
      fields.push_back(field);
      field.clear();
      ++pos;
    } else if (c == '\n') {
      ++pos;
      ++line_no;
      break;
    } else if (c == '\r') {
      ++pos;  // swallowed; '\n' handled next
    } else {
      field.push_back(c);
      ++pos;
    }
  }
  if (!any) return false;
  fields.push_back(field);
  return true;
}

bool needs_quoting(const std::string& s, char delim) {
  return s.find(delim) != std::string::npos || s.find('"') != std::string::npos ||
         s.find('\n') != std::string::npos || s.find('\r') != std::string::npos;
}

std::string quote_field(const std::string& s, char delim) {
  if (!needs_quoting(s, delim)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Table load_csv_string(std::string_view text, const CsvOptions& options) {
  std::size_t pos = 0;
  std::size_t line_no = 1;
  std::vector<std::string> header;
  if (!next_record(text, pos, options.delimiter, header, line_no))
    throw ParseError("empty CSV: no header row");

  std::vector<std::string> names;
  std::set<std::string> seen;
  for (auto& h : header) {
    std::string name = trim(h);
    if (!seen.insert(name).second) throw ParseError("duplicate header name: " + name);
    names.push_back(std::move(name));
  }
  const std::size_t n_cols = names.size();

  std::set<std::string> missing_tokens(options.missing_tokens.begin(), options.missing_tokens.end());

  std::vector<std::vector<std::string>> cells(n_cols);
  std::vector<std::vector<std::uint8_t>> miss(n_cols);
  std::vector<std::string> fields;
  Index n_rows = 0;
  while (true) {
    const std::size_t record_line = line_no;
    if (!next_record(text, pos, options.delimiter, fields, line_no)) break;
    if (n_cols > 1 && fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != n_cols) {
      std::ostringstream msg;
      msg << "ragged row at line " << record_line << ": expected " << n_cols << " fields, got "
          << fields.size();
      throw ParseError(msg.str());
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      std::string cell = trim(fields[j]);
      const bool is_missing = missing_tokens.count(cell) > 0;
      miss[j].push_back(is_missing ? 1 : 0);
      cells[j].push_back(std::move(cell));
    }
    ++n_rows;
  }

  Table table;
  table.n_rows = n_rows;
  table.columns.resize(n_cols);
  for (std::size_t j = 0; j < n_cols; ++j) {
    Column& col = table.columns[j];
    col.name = names[j];
    col.missing = miss[j];
    col.values.resize(n_rows);

    auto it = options.schema.find(col.name);
    bool numeric = true;
    bool binary01 = true;
    Index n_obs = 0;
    for (Index i = 0; i < n_rows; ++i) {
      if (miss[j][static_cast<std::size_t>(i)]) continue;
      ++n_obs;
      double v;
      if (!parse_number(cells[j][static_cast<std::size_t>(i)], v)) {
        numeric = false;
        break;
      }
      if (v != 0.0 && v != 1.0) binary01 = false;
    }
    if (n_obs == 0) binary01 = false;
    ColumnKind kind;
    if (it != options.schema.end()) {
      kind = it->second;
      if (kind != ColumnKind::Categorical && !numeric)
        throw ParseError("column " + col.name + " forced " + to_string(kind) +
                         " but holds non-numeric cells");
    } else if (numeric) {
      kind = binary01 ? ColumnKind::Binary : ColumnKind::Continuous;
    } else {
      kind = ColumnKind::Categorical;
    }
    col.kind = kind;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (kind == ColumnKind::Categorical) {
      std::unordered_map<std::string, int> vocab;
      for (Index i = 0; i < n_rows; ++i) {
        if (miss[j][static_cast<std::size_t>(i)]) {
          col.values[i] = nan;
          continue;
        }
        const std::string& s = cells[j][static_cast<std::size_t>(i)];
        auto [vit, inserted] = vocab.emplace(s, static_cast<int>(col.categories.size()));
        if (inserted) col.categories.push_back(s);
        col.values[i] = static_cast<double>(vit->second);
      }
    } else {
      for (Index i = 0; i < n_rows; ++i) {
        if (miss[j][static_cast<std::size_t>(i)]) {
          col.values[i] = nan;
        } else {
          double v;
          parse_number(cells[j][static_cast<std::size_t>(i)], v);
          col.values[i] = v;
        }
      }
    }
  }

  if (!options.target.empty()) table.target_index = table.column_index(options.target);
  table.validate();
  return table;
}

Table load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_csv_string(buf.str(), options);
}

std::string write_csv_string(const Table& table, char delimiter) {
  std::string out;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out.push_back(delimiter);
    out += quote_field(table.columns[j].name, delimiter);
  }
  out.push_back('\n');
  for (Index i = 0; i < table.n_rows; ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      if (j) out.push_back(delimiter);
      const Column& col = table.columns[j];
      if (col.is_missing(i)) continue;  // canonical missing token: empty
      if (col.kind == ColumnKind::Categorical) {
        out += quote_field(col.categories[static_cast<std::size_t>(col.values[i])], delimiter);
      } else {
        out += format_double(col.values[i]);
      }
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const Table& table, const std::filesystem::path& path, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path.string());
  out << write_csv_string(table, delimiter);
}

}  // namespace missinglens
