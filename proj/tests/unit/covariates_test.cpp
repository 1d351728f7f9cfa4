#include "cidcast/covariates.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace cidcast;
using namespace std::chrono;

namespace {

const Date kDay = parse_date("2022-07-05");

Timestamp local(const char* text) { return local_to_utc(parse_local(text)); }

}  // namespace

TEST(Availability, ParseAndName) {
  for (auto a : {Availability::Static, Availability::Auction, Availability::DayAhead, Availability::Intraday,
                 Availability::Daily, Availability::Live}) {
    EXPECT_EQ(parse_availability(availability_name(a)), a);
  }
  EXPECT_THROW(parse_availability("weekly"), std::invalid_argument);
}

TEST(Availability, ReleaseInstants) {
  const ProductKey k{kDay, 14};
  EXPECT_EQ(available_from(Availability::Static, k), Timestamp::min());
  EXPECT_EQ(available_from(Availability::Auction, k), local("2022-07-04T13:00"));
  EXPECT_EQ(available_from(Availability::DayAhead, k), local("2022-07-04T18:00"));
  EXPECT_EQ(available_from(Availability::Intraday, k), local("2022-07-05T08:00"));
  EXPECT_EQ(available_from(Availability::Daily, k), local("2022-07-06T00:00"));
  EXPECT_EQ(available_from(Availability::Live, k), parse_timestamp("2022-07-05T11:55:00Z"));
}

TEST(CovariateStore, GatedByAvailability) {
  CovariateStore s;
  s.add("E_sol_id", {kDay, 14}, 12.5, Availability::Intraday);
  s.add("E_sol_da", {kDay, 14}, 10.0, Availability::DayAhead);
  EXPECT_FALSE(s.get("E_sol_id", {kDay, 14}, local("2022-07-05T07:59")));
  EXPECT_EQ(s.get("E_sol_id", {kDay, 14}, local("2022-07-05T08:00")), 12.5);
  EXPECT_FALSE(s.get("E_sol_da", {kDay, 14}, local("2022-07-04T17:00")));
  EXPECT_EQ(s.get("E_sol_da", {kDay, 14}, local("2022-07-04T18:00")), 10.0);
  EXPECT_EQ(s.raw("E_sol_id", {kDay, 14}), 12.5);
  EXPECT_FALSE(s.get("E_sol_id", {kDay, 15}, local("2022-07-06T00:00")));
  EXPECT_FALSE(s.get("nope", {kDay, 14}, local("2022-07-06T00:00")));
  EXPECT_THROW(s.add("E_sol_id", {kDay, 15}, 1.0, Availability::DayAhead), std::invalid_argument);
}

TEST(CovariateStore, DailySeriesUsesLatestKnownDate) {
  CovariateStore s;
  s.add("gas", {parse_date("2022-07-01"), 0}, 100.0, Availability::Daily);
  s.add("gas", {parse_date("2022-07-03"), 0}, 103.0, Availability::Daily);
  s.add("gas", {kDay, 0}, 105.0, Availability::Daily);
  // At 10:00 on the 5th the 5th is not yet known; the 3rd is the latest.
  EXPECT_EQ(s.get("gas", {kDay, 14}, local("2022-07-05T10:00")), 103.0);
  EXPECT_EQ(s.get("gas", {kDay, 14}, local("2022-07-06T00:00")), 105.0);
  EXPECT_EQ(s.get("gas", {parse_date("2022-07-02"), 3}, local("2022-07-10T00:00")), 100.0);
  EXPECT_FALSE(s.get("gas", {parse_date("2022-06-30"), 3}, local("2022-07-10T00:00")));
}

TEST(CovariateStore, TruncationDropsLateValues) {
  CovariateStore s;
  s.add("P_da", {kDay, 3}, 80.0, Availability::Auction);
  s.add("E_cons_id", {kDay, 3}, 50.0, Availability::Intraday);
  s.add("hol", {kDay, 3}, 0.0, Availability::Static);
  const auto t = s.truncated(local("2022-07-05T06:00"));
  EXPECT_EQ(t.raw("P_da", {kDay, 3}), 80.0);
  EXPECT_FALSE(t.raw("E_cons_id", {kDay, 3}));
  EXPECT_EQ(t.raw("hol", {kDay, 3}), 0.0);
  EXPECT_TRUE(t.has("E_cons_id"));
  EXPECT_EQ(t.availability("E_cons_id"), Availability::Intraday);
}

TEST(CovariateStore, CsvRoundTripAndMerge) {
  std::istringstream in(
      "series_name,date,hour,value,availability_class\n"
      "P_da,2022-07-05,0,81.25,auction\n"
      "P_da,2022-07-05,1,,auction\n"
      "E_won_da,2022-07-05,0,1234.5,day_ahead\n");
  auto s = CovariateStore::read(in);
  EXPECT_EQ(s.names(), (std::vector<std::string>{"E_won_da", "P_da"}));
  EXPECT_FALSE(s.raw("P_da", {kDay, 1}));
  std::ostringstream out;
  s.write(out);
  std::istringstream back(out.str());
  auto r = CovariateStore::read(back);
  EXPECT_EQ(r.raw("E_won_da", {kDay, 0}), 1234.5);
  EXPECT_EQ(r.raw("P_da", {kDay, 0}), 81.25);

  CovariateStore extra;
  extra.add("P_da", {kDay, 1}, 79.0, Availability::Auction);
  r.merge(extra);
  EXPECT_EQ(r.raw("P_da", {kDay, 1}), 79.0);

  std::istringstream bad("series_name,date,hour,value\n");
  EXPECT_THROW(CovariateStore::read(bad), std::runtime_error);
  std::istringstream bad_hour("series_name,date,hour,value,availability_class\nx,2022-07-05,24,1,static\n");
  EXPECT_THROW(CovariateStore::read(bad_hour), std::runtime_error);
}
