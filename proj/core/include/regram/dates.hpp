#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace regram {

// Civil date at day precision.  Field order makes the defaulted comparison
// chronological.
struct Date {
  int year = 1970;
  unsigned month = 1;  // 1..12
  unsigned day = 1;    // 1..31, valid for the month

  auto operator<=>(const Date&) const = default;

  bool valid() const;
  std::chrono::sys_days to_days() const;
  static Date from_days(std::chrono::sys_days d);
  static Date parse(std::string_view iso);  // "YYYY-MM-DD"
  std::string to_string() const;
};

// Civil date at month precision (used for building completion).
struct YearMonth {
  int year = 1970;
  unsigned month = 1;  // 1..12

  auto operator<=>(const YearMonth&) const = default;

  bool valid() const;
  static YearMonth parse(std::string_view iso);  // "YYYY-MM"
  std::string to_string() const;
};

// Signed day count b - a.
long days_between(const Date& a, const Date& b);

bool same_calendar_month(const Date& a, const Date& b);

// Calendar-month shift; the day is clamped to the length of the target month
// (e.g. 2021-03-31 minus one month is 2021-02-28).
Date add_months(const Date& d, int months);

YearMonth year_month(const Date& d);
YearMonth add_months(const YearMonth& ym, int months);

// Fractional years between the first day of `completion` and `trade`.
double years_between(const YearMonth& completion, const Date& trade);

}  // namespace regram
