#include "cidcast/market_data.hpp"

#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <random>
#include <sstream>

using namespace cidcast;
using namespace std::chrono;
using boost::multiprecision::cpp_rational;

namespace {

const ProductKey kProduct{parse_date("2022-07-01"), 14};  // 12:00-13:00 UTC

Transaction trade(std::string id, Side side, double price, double volume, const char* exec,
                  SelfTrade st = SelfTrade::No) {
  auto p = delivery_period(kProduct);
  Transaction t;
  t.trade_id = std::move(id);
  t.side = side;
  t.price = price;
  t.volume = volume;
  t.execution_time = parse_timestamp(exec);
  t.delivery_start = p.start;
  t.delivery_end = p.end;
  t.self_trade = st;
  return t;
}

const char* kHeader = "TradeId,Side,Price,Volume,ExecutionTime,DeliveryStart,DeliveryEnd,SelfTrade\n";

}  // namespace

TEST(ParseTransactions, SingleRow) {
  std::istringstream in(std::string(kHeader) +
                        "T1,BUY,100.5,2,2022-07-01T10:00:00Z,2022-07-01T12:00:00Z,2022-07-01T13:00:00Z,N\n");
  auto r = parse_transactions(in);
  ASSERT_EQ(r.transactions.size(), 1u);
  EXPECT_TRUE(r.skipped.empty());
  EXPECT_EQ(r.transactions[0].trade_id, "T1");
  EXPECT_DOUBLE_EQ(r.transactions[0].price, 100.5);
}

TEST(ParseTransactions, MissingColumnNamed) {
  std::istringstream in("TradeId,Side,Volume,ExecutionTime,DeliveryStart,DeliveryEnd,SelfTrade\n");
  try {
    parse_transactions(in);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("Price"), std::string::npos);
  }
}

TEST(ParseTransactions, MalformedRowSkipped) {
  std::istringstream in(std::string(kHeader) +
                        "T1,BUY,1,2,2022-07-01T10:00:00Z,2022-07-01T12:00:00Z,2022-07-01T13:00:00Z,N\n"
                        "T2,BUY,1,2,2022-07-01T1x:00:00Z,2022-07-01T12:00:00Z,2022-07-01T13:00:00Z,N\n"
                        "T3,SELL,1,2,2022-07-01T10:00:00Z,2022-07-01T12:00:00Z,2022-07-01T13:00:00Z,U\n");
  auto r = parse_transactions(in);
  EXPECT_EQ(r.transactions.size(), 2u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].line, 3u);
}

TEST(ParseTransactions, WriteRoundTrip) {
  std::vector<Transaction> txs{trade("A", Side::Buy, 101.25, 0.1, "2022-07-01T09:00:00.125Z"),
                               trade("B", Side::Sell, -3.5, 7, "2022-07-01T11:00:00Z", SelfTrade::Unknown)};
  std::stringstream s;
  write_transactions(s, txs);
  auto r = parse_transactions(s);
  ASSERT_EQ(r.transactions.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r.transactions[i].trade_id, txs[i].trade_id);
    EXPECT_EQ(r.transactions[i].price, txs[i].price);
    EXPECT_EQ(r.transactions[i].volume, txs[i].volume);
    EXPECT_EQ(r.transactions[i].execution_time, txs[i].execution_time);
    EXPECT_EQ(r.transactions[i].self_trade, txs[i].self_trade);
  }
}

TEST(FilterEligible, DuplicateKeepsFirst) {
  std::vector<Transaction> txs{trade("X", Side::Buy, 100, 1, "2022-07-01T10:00:00Z"),
                               trade("X", Side::Sell, 100, 1, "2022-07-01T10:00:00Z")};
  auto out = filter_eligible(txs, kProduct);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].side, Side::Buy);
}

TEST(FilterEligible, SelfTradeAndBlocks) {
  auto block = trade("B", Side::Buy, 90, 1, "2022-07-01T10:00:00Z");
  block.delivery_end += hours{2};
  std::vector<Transaction> txs{trade("S", Side::Buy, 100, 1, "2022-07-01T10:00:00Z", SelfTrade::Yes), block,
                               trade("U", Side::Buy, 80, 1, "2022-07-01T10:00:00Z", SelfTrade::Unknown)};
  auto out = filter_eligible(txs, kProduct);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].trade_id, "U");
}

TEST(LiveStats, SingleTrade) {
  std::vector<Transaction> txs{trade("A", Side::Buy, 100, 5, "2022-07-01T10:00:00Z")};
  auto s = live_stats(txs, kProduct, parse_timestamp("2022-07-01T11:00:00Z"));
  EXPECT_EQ(*s.idfull, 100);
  EXPECT_EQ(*s.high, 100);
  EXPECT_EQ(*s.low, 100);
  EXPECT_EQ(*s.last, 100);
  EXPECT_EQ(*s.deviat, 0);
  EXPECT_EQ(s.v_buy, 5);
}

TEST(LiveStats, TwoTradesVwap) {
  std::vector<Transaction> txs{trade("A", Side::Buy, 100, 2, "2022-07-01T09:00:00Z"),
                               trade("B", Side::Sell, 110, 6, "2022-07-01T11:10:00Z")};
  auto s = live_stats(txs, kProduct, parse_timestamp("2022-07-01T11:40:00Z"));
  EXPECT_DOUBLE_EQ(*s.idfull, 107.5);
  EXPECT_DOUBLE_EQ(*s.deviat, 2.5);
  EXPECT_DOUBLE_EQ(*s.id3, 107.5);
  EXPECT_DOUBLE_EQ(*s.id1, 110);
  EXPECT_EQ(*s.last, 110);
  EXPECT_EQ(s.v_buy, 2);
  EXPECT_EQ(s.v_sell, 6);
}

TEST(LiveStats, EmptyBeforeTau) {
  std::vector<Transaction> txs{trade("A", Side::Buy, 100, 5, "2022-07-01T10:00:00Z")};
  auto s = live_stats(txs, kProduct, parse_timestamp("2022-07-01T09:00:00Z"));
  EXPECT_FALSE(s.idfull);
  EXPECT_FALSE(s.high);
  EXPECT_FALSE(s.last);
  EXPECT_EQ(s.v_buy, 0);
  EXPECT_EQ(s.v_sell, 0);
}

TEST(LiveStats, WindowBoundariesClosed) {
  std::vector<Transaction> txs{trade("A", Side::Buy, 10, 1, "2022-07-01T09:00:00Z"),
                               trade("B", Side::Buy, 20, 1, "2022-07-01T11:00:00Z"),
                               trade("C", Side::Buy, 40, 1, "2022-07-01T11:30:00Z"),
                               trade("D", Side::Buy, 80, 1, "2022-07-01T11:30:00.001Z")};
  auto s = live_stats(txs, kProduct, parse_timestamp("2022-07-01T11:55:00Z"));
  EXPECT_DOUBLE_EQ(*s.id3, (10 + 20 + 40) / 3.0);
  EXPECT_DOUBLE_EQ(*s.id1, 30);
}

TEST(EodStats, ExcludesPostGate) {
  std::vector<Transaction> txs{trade("A", Side::Buy, 100, 1, "2022-07-01T11:00:00Z"),
                               trade("B", Side::Buy, 200, 1, "2022-07-01T11:56:00Z")};
  auto s = eod_stats(txs, kProduct);
  EXPECT_EQ(*s.idfull, 100);
  EXPECT_FALSE(eod_stats({}, kProduct).idfull);
}

TEST(LiveSeries, GridAndInterpolation) {
  std::vector<Transaction> txs;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> price(50, 150), vol(0.1, 5);
  auto open = local_to_utc(parse_local("2022-06-30T15:00"));
  for (int i = 0; i < 200; ++i) {
    auto t = trade("T" + std::to_string(i), i % 2 ? Side::Buy : Side::Sell, price(rng), vol(rng), "2022-07-01T00:00Z");
    t.execution_time = open + minutes{6 * i};
    txs.push_back(t);
  }
  auto two = build_live_series(txs, kProduct, 2);
  ASSERT_EQ(two.grid.size(), 2u);
  EXPECT_EQ(two.grid.back(), delivery_period(kProduct).end);
  EXPECT_THROW(build_live_series(txs, kProduct, 1), std::invalid_argument);

  auto series = build_live_series(txs, kProduct);
  ASSERT_EQ(series.grid.size(), 250u);
  for (std::size_t i = 0; i < series.grid.size(); ++i) {
    auto direct = live_stats(txs, kProduct, series.grid[i]);
    ASSERT_EQ(series.values[i].idfull.has_value(), direct.idfull.has_value());
    if (direct.idfull) EXPECT_EQ(*series.values[i].idfull, *direct.idfull);
    if (i) {
      EXPECT_LT(series.grid[i - 1], series.grid[i]);
      EXPECT_GE(series.values[i].v_buy, series.values[i - 1].v_buy);
    }
  }
  EXPECT_EQ(*series.eod().idfull, *eod_stats(txs, kProduct).idfull);

  auto mid = series.grid[100] + (series.grid[101] - series.grid[100]) / 4;
  auto v = series.at(mid);
  double a = *series.values[100].idfull, b = *series.values[101].idfull;
  EXPECT_NEAR(*v.idfull, a + 0.25 * (b - a), 1e-9);
}

TEST(LiveSeries, FallsBackToEarlierValue) {
  LiveSeries s;
  s.product = kProduct;
  auto t0 = parse_timestamp("2022-07-01T00:00Z");
  s.grid = {t0, t0 + hours{1}, t0 + hours{2}};
  s.values.resize(3);
  s.values[0].id1 = 10.0;
  s.values[2].id1 = 30.0;
  EXPECT_EQ(*s.at(t0 + minutes{30}).id1, 10.0);
  EXPECT_EQ(*s.at(t0 + minutes{90}).id1, 10.0);
  EXPECT_FALSE(s.at(t0 - minutes{1}).id1);
}

// Random fixtures against a rational-arithmetic oracle, plus the VWAP and
// monotonicity properties.
TEST(LiveStatsProperty, RationalOracleAndInvariants) {
  std::mt19937_64 rng(2024);
  auto start = delivery_period(kProduct).start;
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> count(1, 40), cents(-50000, 300000), tenths(1, 500), mins(-900, -5);
    std::vector<Transaction> raw;
    int n = count(rng);
    for (int i = 0; i < n; ++i) {
      auto t = trade("T" + std::to_string(rng() % 30), rng() % 2 ? Side::Buy : Side::Sell, cents(rng) / 100.0,
                     tenths(rng) / 10.0, "2022-07-01T00:00Z", static_cast<SelfTrade>(rng() % 3));
      t.execution_time = start + minutes{mins(rng)};
      raw.push_back(t);
    }
    auto once = filter_eligible(raw, kProduct);
    auto twice = filter_eligible(once, kProduct);
    ASSERT_EQ(once.size(), twice.size());

    auto tau = start - minutes{std::uniform_int_distribution<int>(5, 900)(rng)};
    auto s = live_stats(once, kProduct, tau);
    cpp_rational pv = 0, v = 0;
    for (const auto& t : once) {
      if (t.execution_time > tau) continue;
      cpp_rational p(static_cast<long>(std::llround(t.price * 100)), 100);
      cpp_rational w(static_cast<long>(std::llround(t.volume * 10)), 10);
      pv += p * w;
      v += w;
    }
    if (v == 0) {
      EXPECT_FALSE(s.idfull);
      continue;
    }
    double oracle = static_cast<double>(cpp_rational(pv / v));
    ASSERT_TRUE(s.idfull);
    EXPECT_LE(std::abs(*s.idfull - oracle), 1e-9 * std::max(1.0, std::abs(oracle)));
    EXPECT_LE(*s.low, *s.idfull);
    EXPECT_GE(*s.high, *s.idfull);

    auto later = live_stats(once, kProduct, tau + minutes{30});
    EXPECT_GE(later.v_buy, s.v_buy);
    EXPECT_GE(later.v_sell, s.v_sell);
  }
}

TEST(TradeBook, GroupsAndTruncates) {
  std::vector<Transaction> txs{trade("A", Side::Buy, 100, 1, "2022-07-01T11:00:00Z"),
                               trade("A", Side::Sell, 100, 1, "2022-07-01T11:00:00Z"),
                               trade("B", Side::Buy, 90, 1, "2022-07-01T10:00:00Z")};
  TradeBook book(txs);
  ASSERT_EQ(book.trades(kProduct).size(), 2u);
  EXPECT_EQ(book.trades(kProduct)[0].trade_id, "B");
  EXPECT_EQ(book.products().size(), 1u);
  auto cut = book.truncated(parse_timestamp("2022-07-01T10:30:00Z"));
  EXPECT_EQ(cut.trades(kProduct).size(), 1u);
  EXPECT_TRUE(book.trades({kProduct.day, 3}).empty());
}
