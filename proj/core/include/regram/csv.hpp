#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace regram {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // each row has header.size() fields
};

// Reads a CSV document with quoted fields, doubled-quote escapes and CRLF
// tolerance.  Every data row must have exactly as many fields as the header;
// violations throw with the 1-based line number.
CsvTable read_csv(std::istream& in);

std::string csv_escape(const std::string& field);

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace regram
