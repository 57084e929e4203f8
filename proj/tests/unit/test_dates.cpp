#include "regram/dates.hpp"

#include <gtest/gtest.h>

#include "test_helpers.hpp"

using regram::Date;
using regram::YearMonth;

TEST(Date, ParseAndToStringRoundTrip) {
  const Date d = Date::parse("2020-02-29");
  EXPECT_EQ(d.year, 2020);
  EXPECT_EQ(d.month, 2u);
  EXPECT_EQ(d.day, 29u);
  EXPECT_EQ(d.to_string(), "2020-02-29");
}

TEST(Date, ParseRejectsMalformedInput) {
  EXPECT_NE(testutil::thrown_message([] { Date::parse("2020/01/01"); }), "");
  EXPECT_NE(testutil::thrown_message([] { Date::parse("2020-13-01"); }), "");
  EXPECT_NE(testutil::thrown_message([] { Date::parse("2021-02-29"); }), "");
  EXPECT_NE(testutil::thrown_message([] { Date::parse("not-a-date"); }), "");
  EXPECT_NE(testutil::thrown_message([] { Date::parse("2020-01-00"); }), "");
}

TEST(Date, ValidityRespectsLeapYears) {
  EXPECT_TRUE((Date{2020, 2, 29}).valid());
  EXPECT_FALSE((Date{2021, 2, 29}).valid());
  EXPECT_FALSE((Date{2021, 4, 31}).valid());
  EXPECT_FALSE((Date{2021, 13, 1}).valid());
  EXPECT_FALSE((Date{2021, 1, 0}).valid());
}

TEST(Date, ComparisonIsChronological) {
  EXPECT_LT((Date{2019, 12, 31}), (Date{2020, 1, 1}));
  EXPECT_LT((Date{2020, 1, 31}), (Date{2020, 2, 1}));
  EXPECT_EQ((Date{2020, 5, 5}), (Date{2020, 5, 5}));
}

TEST(Date, DaysRoundTrip) {
  const Date d{2021, 6, 30};
  EXPECT_EQ(Date::from_days(d.to_days()), d);
}

TEST(Date, DaysBetweenIsSigned) {
  EXPECT_EQ(regram::days_between(Date{2019, 1, 1}, Date{2019, 1, 31}), 30);
  EXPECT_EQ(regram::days_between(Date{2019, 1, 31}, Date{2019, 1, 1}), -30);
  EXPECT_EQ(regram::days_between(Date{2020, 2, 28}, Date{2020, 3, 1}), 2);  // leap day
  EXPECT_EQ(regram::days_between(Date{2020, 1, 1}, Date{2021, 1, 1}), 366);
}

TEST(Date, SameCalendarMonth) {
  EXPECT_TRUE(regram::same_calendar_month(Date{2020, 3, 1}, Date{2020, 3, 31}));
  EXPECT_FALSE(regram::same_calendar_month(Date{2020, 3, 31}, Date{2020, 4, 1}));
  EXPECT_FALSE(regram::same_calendar_month(Date{2019, 3, 15}, Date{2020, 3, 15}));
}

TEST(Date, AddMonthsClampsToMonthEnd) {
  EXPECT_EQ(regram::add_months(Date{2021, 3, 31}, -1), (Date{2021, 2, 28}));
  EXPECT_EQ(regram::add_months(Date{2020, 1, 31}, 1), (Date{2020, 2, 29}));
  EXPECT_EQ(regram::add_months(Date{2020, 6, 15}, 12), (Date{2021, 6, 15}));
  EXPECT_EQ(regram::add_months(Date{2020, 1, 15}, -2), (Date{2019, 11, 15}));
}

TEST(YearMonthType, ParseAndWrap) {
  const YearMonth ym = YearMonth::parse("2019-12");
  EXPECT_EQ(ym.year, 2019);
  EXPECT_EQ(ym.month, 12u);
  EXPECT_EQ(ym.to_string(), "2019-12");
  EXPECT_EQ(regram::add_months(ym, 1), (YearMonth{2020, 1}));
  EXPECT_EQ(regram::add_months(ym, -12), (YearMonth{2018, 12}));
  EXPECT_NE(testutil::thrown_message([] { YearMonth::parse("2019-13"); }), "");
  EXPECT_NE(testutil::thrown_message([] { YearMonth::parse("2019"); }), "");
}

TEST(YearMonthType, OfDate) {
  EXPECT_EQ(regram::year_month(Date{2020, 7, 31}), (YearMonth{2020, 7}));
}

TEST(YearMonthType, YearsBetween) {
  // Anchored at the first day of the completion month.
  EXPECT_DOUBLE_EQ(regram::years_between(YearMonth{2020, 5}, Date{2020, 5, 1}), 0.0);
  const double ten = regram::years_between(YearMonth{2010, 5}, Date{2020, 5, 1});
  EXPECT_NEAR(ten, 10.0, 0.01);
  EXPECT_GT(regram::years_between(YearMonth{2010, 5}, Date{2020, 6, 1}), ten);
  EXPECT_LT(regram::years_between(YearMonth{2020, 5}, Date{2020, 4, 1}), 0.0);
}
