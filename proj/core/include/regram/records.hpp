#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "regram/dates.hpp"

namespace regram {

// One observed transaction.  Keys of the map-valued members are full CSV
// column names, so a parsed record round-trips bit-for-bit through the
// writer.
struct TransactionRecord {
  std::string id;
  std::string city;
  double latitude = 0.0;
  double longitude = 0.0;
  Date trade_date;
  YearMonth completion_date;
  std::string building_type;
  std::string main_purpose;
  bool small_house_flag = false;
  bool shop_flag = false;
  bool first_floor_flag = false;
  std::string land_usage;
  double house_age = 0.0;   // years at trade date
  double unit_price = 0.0;  // currency per square meter
  std::map<std::string, double> object_fields;  // numeric object attributes
  std::map<std::string, double> poi_counts;     // "poi_cnt_<cat>_<radius>m"
  std::map<std::string, double> poi_min_dist;   // "poi_dist_<cat>", meters
};

// Column layout shared by the synthetic generator, the parser and the writer.
struct CsvSchema {
  std::vector<std::string> object_numeric;  // e.g. area_m2, room_count, ...
  std::vector<std::string> poi_categories;  // e.g. school, park, ...
  std::vector<int> poi_radii_m;             // count feature per category x radius

  static CsvSchema default_schema();
  std::vector<std::string> columns() const;  // full ordered header
  std::string poi_count_column(const std::string& category, int radius_m) const;
  std::string poi_dist_column(const std::string& category) const;
};

// Strict parser: any row with a missing or unparsable mandatory field aborts
// the parse with an error naming the row and field.
std::vector<TransactionRecord> parse_transactions(std::istream& in, const CsvSchema& schema);

void write_transactions(std::ostream& out, const std::vector<TransactionRecord>& records,
                        const CsvSchema& schema);

// Field-level sanity: coordinates in range, positive price, non-negative age,
// completion not after trade, flags boolean.  Throws naming the field.
void validate_record(const TransactionRecord& rec);

}  // namespace regram
