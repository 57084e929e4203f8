#include "regram/records.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

#include "regram/csv.hpp"

namespace regram {

namespace {

[[noreturn]] void reject(size_t row, const std::string& field, const std::string& why) {
  throw std::runtime_error("record rejected at data row " + std::to_string(row) + ": field '" +
                           field + "' " + why);
}

double parse_double(const std::string& s, size_t row, const std::string& field) {
  if (s.empty()) reject(row, field, "is empty");
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    reject(row, field, "is not a number: '" + s + "'");
  }
  if (!std::isfinite(value)) reject(row, field, "is not finite");
  return value;
}

bool parse_flag(const std::string& s, size_t row, const std::string& field) {
  if (s == "0") return false;
  if (s == "1") return true;
  reject(row, field, "must be 0 or 1, got '" + s + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

CsvSchema CsvSchema::default_schema() {
  CsvSchema s;
  s.object_numeric = {"area_m2", "room_count", "floor_number", "total_floors"};
  s.poi_categories = {"hospital", "market", "office", "park", "school", "station"};
  s.poi_radii_m = {500, 1000};
  return s;
}

std::string CsvSchema::poi_count_column(const std::string& category, int radius_m) const {
  return "poi_cnt_" + category + "_" + std::to_string(radius_m) + "m";
}

std::string CsvSchema::poi_dist_column(const std::string& category) const {
  return "poi_dist_" + category;
}

std::vector<std::string> CsvSchema::columns() const {
  std::vector<std::string> cols = {
      "id",          "city",          "latitude",       "longitude",
      "trade_date",  "completion_date", "building_type", "main_purpose",
      "small_house_flag", "shop_flag", "first_floor_flag", "land_usage",
      "house_age",   "unit_price"};
  for (const auto& name : object_numeric) cols.push_back(name);
  for (const auto& cat : poi_categories) {
    for (int r : poi_radii_m) cols.push_back(poi_count_column(cat, r));
  }
  for (const auto& cat : poi_categories) cols.push_back(poi_dist_column(cat));
  return cols;
}

std::vector<TransactionRecord> parse_transactions(std::istream& in, const CsvSchema& schema) {
  const CsvTable table = read_csv(in);
  const std::vector<std::string> expected = schema.columns();

  std::unordered_map<std::string, size_t> col;
  for (size_t i = 0; i < table.header.size(); ++i) col[table.header[i]] = i;
  for (const auto& name : expected) {
    if (!col.count(name)) throw std::runtime_error("CSV is missing required column '" + name + "'");
  }

  std::vector<TransactionRecord> records;
  records.reserve(table.rows.size());

  for (size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const size_t row_no = r + 1;  // 1-based data row
    auto field = [&](const std::string& name) -> const std::string& { return row[col.at(name)]; };

    TransactionRecord rec;
    rec.id = field("id");
    if (rec.id.empty()) reject(row_no, "id", "is empty");
    rec.city = field("city");
    if (rec.city.empty()) reject(row_no, "city", "is empty");
    rec.latitude = parse_double(field("latitude"), row_no, "latitude");
    rec.longitude = parse_double(field("longitude"), row_no, "longitude");
    try {
      rec.trade_date = Date::parse(field("trade_date"));
      rec.completion_date = YearMonth::parse(field("completion_date"));
    } catch (const std::exception& e) {
      reject(row_no, "trade_date/completion_date", std::string("is invalid: ") + e.what());
    }
    rec.building_type = field("building_type");
    if (rec.building_type.empty()) reject(row_no, "building_type", "is empty");
    rec.main_purpose = field("main_purpose");
    if (rec.main_purpose.empty()) reject(row_no, "main_purpose", "is empty");
    rec.small_house_flag = parse_flag(field("small_house_flag"), row_no, "small_house_flag");
    rec.shop_flag = parse_flag(field("shop_flag"), row_no, "shop_flag");
    rec.first_floor_flag = parse_flag(field("first_floor_flag"), row_no, "first_floor_flag");
    rec.land_usage = field("land_usage");
    if (rec.land_usage.empty()) reject(row_no, "land_usage", "is empty");
    rec.house_age = parse_double(field("house_age"), row_no, "house_age");
    rec.unit_price = parse_double(field("unit_price"), row_no, "unit_price");

    for (const auto& name : schema.object_numeric) {
      rec.object_fields[name] = parse_double(field(name), row_no, name);
    }
    for (const auto& cat : schema.poi_categories) {
      for (int radius : schema.poi_radii_m) {
        const std::string name = schema.poi_count_column(cat, radius);
        rec.poi_counts[name] = parse_double(field(name), row_no, name);
      }
      const std::string name = schema.poi_dist_column(cat);
      rec.poi_min_dist[name] = parse_double(field(name), row_no, name);
    }

    try {
      validate_record(rec);
    } catch (const std::exception& e) {
      throw std::runtime_error("record rejected at data row " + std::to_string(row_no) + ": " +
                               e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_transactions(std::ostream& out, const std::vector<TransactionRecord>& records,
                        const CsvSchema& schema) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& rec : records) {
    std::vector<std::string> row = {
        rec.id,
        rec.city,
        format_double(rec.latitude),
        format_double(rec.longitude),
        rec.trade_date.to_string(),
        rec.completion_date.to_string(),
        rec.building_type,
        rec.main_purpose,
        rec.small_house_flag ? "1" : "0",
        rec.shop_flag ? "1" : "0",
        rec.first_floor_flag ? "1" : "0",
        rec.land_usage,
        format_double(rec.house_age),
        format_double(rec.unit_price)};
    for (const auto& name : schema.object_numeric) row.push_back(format_double(rec.object_fields.at(name)));
    for (const auto& cat : schema.poi_categories) {
      for (int radius : schema.poi_radii_m) {
        row.push_back(format_double(rec.poi_counts.at(schema.poi_count_column(cat, radius))));
      }
    }
    for (const auto& cat : schema.poi_categories) {
      row.push_back(format_double(rec.poi_min_dist.at(schema.poi_dist_column(cat))));
    }
    rows.push_back(std::move(row));
  }
  write_csv(out, schema.columns(), rows);
}

void validate_record(const TransactionRecord& rec) {
  auto bad = [&](const std::string& field, const std::string& why) {
    throw std::runtime_error("field '" + field + "' " + why + " (id=" + rec.id + ")");
  };
  if (rec.latitude < -90.0 || rec.latitude > 90.0) bad("latitude", "must be in [-90, 90]");
  if (rec.longitude < -180.0 || rec.longitude > 180.0) bad("longitude", "must be in [-180, 180]");
  if (!rec.trade_date.valid()) bad("trade_date", "is not a valid date");
  if (!rec.completion_date.valid()) bad("completion_date", "is not a valid month");
  if (YearMonth{rec.trade_date.year, rec.trade_date.month} < rec.completion_date) {
    bad("completion_date", "is after trade_date");
  }
  if (rec.house_age < 0.0) bad("house_age", "must be >= 0");
  if (!(rec.unit_price > 0.0)) bad("unit_price", "must be > 0");
  for (const auto& [name, value] : rec.poi_counts) {
    if (value < 0.0) bad(name, "must be >= 0");
  }
  for (const auto& [name, value] : rec.poi_min_dist) {
    if (value < 0.0) bad(name, "must be >= 0");
  }
}

}  // namespace regram
