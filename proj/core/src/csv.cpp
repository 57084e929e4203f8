#include "regram/csv.hpp"

#include <stdexcept>

namespace regram {

namespace {

[[noreturn]] void fail(size_t line, const std::string& what) {
  throw std::runtime_error("CSV parse error at line " + std::to_string(line) + ": " + what);
}

// Parses one logical record starting at `pos`; quoted fields may span
// physical lines.  Returns false at end of input.
bool next_record(const std::string& text, size_t& pos, size_t& line,
                 std::vector<std::string>& out) {
  out.clear();
  if (pos >= text.size()) return false;

  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  const size_t record_line = line;

  while (pos < text.size()) {
    const char c = text[pos];
    if (in_quotes) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
        } else {
          in_quotes = false;
          ++pos;
          if (pos < text.size() && text[pos] != ',' && text[pos] != '\n' && text[pos] != '\r') {
            fail(line, "unexpected character after closing quote");
          }
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
        ++pos;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) fail(line, "quote inside unquoted field");
        in_quotes = true;
        saw_any = true;
        ++pos;
        break;
      case ',':
        out.push_back(std::move(field));
        field.clear();
        saw_any = true;
        ++pos;
        break;
      case '\r':
        ++pos;
        if (pos < text.size() && text[pos] == '\n') ++pos;
        ++line;
        out.push_back(std::move(field));
        return true;
      case '\n':
        ++pos;
        ++line;
        out.push_back(std::move(field));
        return true;
      default:
        field.push_back(c);
        saw_any = true;
        ++pos;
        break;
    }
  }
  if (in_quotes) fail(record_line, "unterminated quoted field");
  (void)saw_any;
  out.push_back(std::move(field));
  return true;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  CsvTable table;
  size_t pos = 0;
  size_t line = 1;

  std::vector<std::string> record;
  if (!next_record(text, pos, line, record)) {
    throw std::runtime_error("CSV parse error at line 1: missing header row");
  }
  table.header = record;

  while (true) {
    const size_t record_line = line;
    if (!next_record(text, pos, line, record)) break;
    if (record.size() == 1 && record[0].empty()) continue;  // blank line
    if (record.size() != table.header.size()) {
      fail(record_line, "expected " + std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(record.size()));
    }
    table.rows.push_back(record);
  }
  return table;
}

std::string csv_escape(const std::string& field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto write_row = [&out](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(row[i]);
    }
    out << '\n';
  };
  write_row(header);
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw std::runtime_error("CSV write error: row width does not match header");
    }
    write_row(row);
  }
}

}  // namespace regram
