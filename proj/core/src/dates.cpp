#include "regram/dates.hpp"

#include <charconv>
#include <stdexcept>

namespace regram {

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("invalid " + std::string(what) + " in date: '" + std::string(s) + "'");
  }
  return value;
}

std::chrono::year_month_day to_ymd(const Date& d) {
  return std::chrono::year_month_day{std::chrono::year{d.year}, std::chrono::month{d.month},
                                     std::chrono::day{d.day}};
}

}  // namespace

bool Date::valid() const { return to_ymd(*this).ok(); }

std::chrono::sys_days Date::to_days() const {
  const auto ymd = to_ymd(*this);
  if (!ymd.ok()) throw std::runtime_error("invalid date: " + to_string());
  return std::chrono::sys_days{ymd};
}

Date Date::from_days(std::chrono::sys_days d) {
  const std::chrono::year_month_day ymd{d};
  return Date{int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
}

Date Date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw std::runtime_error("date must be YYYY-MM-DD, got '" + std::string(iso) + "'");
  }
  Date d;
  d.year = parse_int(iso.substr(0, 4), "year");
  d.month = unsigned(parse_int(iso.substr(5, 2), "month"));
  d.day = unsigned(parse_int(iso.substr(8, 2), "day"));
  if (!d.valid()) throw std::runtime_error("invalid calendar date: '" + std::string(iso) + "'");
  return d;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year, month, day);
  return buf;
}

bool YearMonth::valid() const { return month >= 1 && month <= 12; }

YearMonth YearMonth::parse(std::string_view iso) {
  if (iso.size() != 7 || iso[4] != '-') {
    throw std::runtime_error("month must be YYYY-MM, got '" + std::string(iso) + "'");
  }
  YearMonth ym;
  ym.year = parse_int(iso.substr(0, 4), "year");
  ym.month = unsigned(parse_int(iso.substr(5, 2), "month"));
  if (!ym.valid()) throw std::runtime_error("invalid calendar month: '" + std::string(iso) + "'");
  return ym;
}

std::string YearMonth::to_string() const {
  char buf[12];
  std::snprintf(buf, sizeof(buf), "%04d-%02u", year, month);
  return buf;
}

long days_between(const Date& a, const Date& b) {
  return (b.to_days() - a.to_days()).count();
}

bool same_calendar_month(const Date& a, const Date& b) {
  return a.year == b.year && a.month == b.month;
}

Date add_months(const Date& d, int months) {
  auto ymd = to_ymd(d) + std::chrono::months{months};
  if (!ymd.ok()) {
    // Day overflows the target month: clamp to its last day.
    ymd = ymd.year() / ymd.month() / std::chrono::last;
  }
  return Date{int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
}

YearMonth year_month(const Date& d) { return YearMonth{d.year, d.month}; }

YearMonth add_months(const YearMonth& ym, int months) {
  const auto shifted =
      std::chrono::year_month{std::chrono::year{ym.year}, std::chrono::month{ym.month}} +
      std::chrono::months{months};
  return YearMonth{int(shifted.year()), unsigned(shifted.month())};
}

double years_between(const YearMonth& completion, const Date& trade) {
  const Date first{completion.year, completion.month, 1};
  return double(days_between(first, trade)) / 365.25;
}

}  // namespace regram
