#include "cidcast/synthetic.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace cidcast;
using namespace std::chrono;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cidcast_synth_" + name);
  std::filesystem::remove_all(p);
  return p;
}

SynthConfig small(int days) {
  SynthConfig c;
  c.start = parse_date("2022-03-20");
  c.days = days;
  return c;
}

}  // namespace

TEST(Synthetic, DeterministicFiles) {
  auto c = small(3);
  c.seed = 77;
  const auto a = scratch("a"), b = scratch("b");
  write_synthetic(generate(c), a);
  write_synthetic(generate(c), b);
  for (const char* f : {"transactions.csv", "curves.csv", "covariates.csv", "latent.csv", "truth.json"}) {
    const auto x = slurp(a / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
  c.seed = 78;
  const auto d = scratch("d");
  write_synthetic(generate(c), d);
  EXPECT_NE(slurp(a / "transactions.csv"), slurp(d / "transactions.csv"));
}

TEST(Synthetic, FilesRoundTrip) {
  const auto data = generate(small(2));
  const auto dir = scratch("rt");
  write_synthetic(data, dir);
  const auto parsed = parse_transactions(dir / "transactions.csv");
  EXPECT_TRUE(parsed.skipped.empty());
  ASSERT_EQ(parsed.transactions.size(), data.transactions.size());
  for (std::size_t i = 0; i < data.transactions.size(); ++i) {
    const auto& x = data.transactions[i];
    const auto& y = parsed.transactions[i];
    EXPECT_EQ(x.trade_id, y.trade_id);
    EXPECT_EQ(x.side, y.side);
    EXPECT_EQ(x.price, y.price);
    EXPECT_EQ(x.volume, y.volume);
    EXPECT_EQ(x.execution_time, y.execution_time);
    EXPECT_EQ(x.delivery_start, y.delivery_start);
    EXPECT_EQ(x.delivery_end, y.delivery_end);
    EXPECT_EQ(x.self_trade, y.self_trade);
  }
  const auto cov = CovariateStore::load(dir / "covariates.csv");
  EXPECT_EQ(cov.names(), data.covariates.names());
  for (const auto& name : cov.names()) {
    for (int h : {0, 13, 23}) {
      const ProductKey k{parse_date("2022-03-21"), h};
      EXPECT_EQ(cov.raw(name, k), data.covariates.raw(name, k)) << name;
    }
  }
  const auto curves = CurveBook::load(dir / "curves.csv");
  ASSERT_EQ(curves.size(), data.curves.size());
  const ProductKey k{parse_date("2022-03-21"), 9};
  EXPECT_EQ(curves.find(k)->clear.price, data.curves.find(k)->clear.price);
}

TEST(Synthetic, CurvesClearAtDayAheadPoint) {
  const auto data = generate(small(2));
  for (const auto& lp : data.latent) {
    const auto* e = data.curves.find(lp.key);
    ASSERT_NE(e, nullptr);
    EXPECT_NEAR(e->clear.price, lp.p_da, 1e-9);
    EXPECT_NEAR(e->clear.volume, lp.v_da, 1e-9);
  }
}

TEST(Synthetic, SpringChangeDayHasNoDuplicatePeriod) {
  const auto data = generate(small(14));  // covers 2022-03-27
  const TradeBook book(data.transactions);
  std::size_t spring = 0;
  for (const auto& lp : data.latent) spring += lp.key.day == parse_date("2022-03-27");
  EXPECT_EQ(spring, 23u);
  EXPECT_EQ(data.latent.size(), 14u * 24u - 1u);
}

TEST(Synthetic, NoiselessIdFullIsLatentPath) {
  auto c = small(2);
  c.jump_rate = 0.0;
  c.random_walk_sigma = 0.0;
  c.microstructure_sigma = 0.0;
  c.w_shift = 0.0;
  c.w_delta_consumption = 0.0;
  c.w_driver = 0.0;
  const auto data = generate(c);
  const TradeBook book(data.transactions);
  for (const auto& lp : data.latent) {
    const auto eod = eod_stats(book.trades(lp.key), lp.key);
    if (lp.trades == 0) continue;
    ASSERT_TRUE(eod.idfull);
    EXPECT_NEAR(*eod.idfull, lp.fair_at_gate, 1e-9);
  }
}

TEST(Synthetic, ArrivalIntensityScalesTradeCount) {
  auto c = small(5);
  c.trades_per_product = 20.0;
  auto count = [](const SynthData& d, std::size_t limit) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < limit; ++i) n += d.latent[i].trades;
    return static_cast<double>(n);
  };
  const double one = count(generate(c), 100);
  c.trades_per_product = 40.0;
  const double two = count(generate(c), 100);
  EXPECT_NEAR(two / one, 2.0, 0.1);
  EXPECT_NEAR(one / 100.0, 20.0, 1.0);
}

TEST(Synthetic, FeedArtefactsPresent) {
  auto c = small(4);
  c.self_trade_share = 0.05;
  c.block_share = 0.05;
  c.duplicate_share = 0.05;
  c.unknown_flag_share = 0.05;
  const auto data = generate(c);
  std::size_t self = 0, unknown = 0, blocks = 0;
  for (const auto& t : data.transactions) {
    self += t.self_trade == SelfTrade::Yes;
    unknown += t.self_trade == SelfTrade::Unknown;
    blocks += t.delivery_end - t.delivery_start != hours{1};
  }
  EXPECT_GT(self, 0u);
  EXPECT_GT(unknown, 0u);
  EXPECT_GT(blocks, 0u);
  // Eligible count after filtering equals the generated count.
  const TradeBook book(data.transactions);
  std::size_t eligible = 0, expected = 0;
  for (const auto& lp : data.latent) {
    eligible += book.trades(lp.key).size();
    expected += lp.trades;
  }
  EXPECT_EQ(eligible, expected);
}

TEST(Synthetic, DecoysAreCollinear) {
  const auto data = generate(small(60));
  std::vector<double> a, b, d;
  for (Date day = parse_date("2022-03-20"); day < parse_date("2022-05-19"); day += days{1}) {
    for (int h = 0; h < 24; ++h) {
      a.push_back(*data.covariates.raw("decoy_1", {day, h}));
      b.push_back(*data.covariates.raw("decoy_2", {day, h}));
      d.push_back(*data.covariates.raw("driver", {day, h}));
    }
  }
  auto corr = [](const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::Map<const Eigen::VectorXd> X(x.data(), n), Y(y.data(), n);
    const Eigen::VectorXd xc = X.array() - X.mean(), yc = Y.array() - Y.mean();
    return xc.dot(yc) / std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  };
  EXPECT_NEAR(corr(a, b), 0.95, 0.02);
  EXPECT_NEAR(corr(a, d), std::sqrt(0.95), 0.02);
}

TEST(Synthetic, ResidualLoadEffectRecoveredByOls) {
  auto c = small(400);
  c.ar = 0.0;
  c.jump_rate = 0.0;
  const auto data = generate(c);
  std::vector<double> y;
  std::vector<std::vector<double>> rows;
  for (int di = 0; di < c.days; ++di) {
    const Date day = c.start + days{di};
    const unsigned wd = weekday{day}.iso_encoding() - 1;
    for (int h = 0; h < 24; ++h) {
      const ProductKey k{day, h};
      auto v = [&](const char* s) { return *data.covariates.raw(s, k); };
      std::vector<double> r(24 + 6 + 1, 0.0);
      r[h] = 1.0;
      if (wd > 0) r[24 + wd - 1] = 1.0;
      r[30] = v("E_tot_da") - v("E_sol_da") - v("E_won_da") - v("E_woff_da");
      rows.push_back(r);
      y.push_back(v("P_da"));
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X(n, 31);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < 31; ++j) X(i, j) = rows[i][j];
  const Eigen::VectorXd Y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  const Eigen::MatrixXd G = X.transpose() * X;
  const Eigen::VectorXd w = G.ldlt().solve(X.transpose() * Y);
  const double s2 = (Y - X * w).squaredNorm() / static_cast<double>(n - 31);
  const double se = std::sqrt(s2 * G.inverse()(30, 30));
  EXPECT_LT(std::abs(w(30) - c.w_residual_load), 3.0 * se) << w(30) << " +- " << se;
}

TEST(Synthetic, ConfigValidation) {
  auto c = small(1);
  c.ar = 1.0;
  EXPECT_THROW(generate(c), std::invalid_argument);
  c = small(1);
  c.trades_per_product = 0.0;
  EXPECT_THROW(generate(c), std::invalid_argument);
  c = small(0);
  EXPECT_THROW(generate(c), std::invalid_argument);
}

TEST(Synthetic, TruthJsonNamesEffects) {
  const auto j = truth_json(generate(small(1)));
  EXPECT_NE(j.find("\"shift:renewables\""), std::string::npos);
  EXPECT_NE(j.find("\"driver\""), std::string::npos);
  EXPECT_NE(j.find("\"pairwise_correlation\": 0.95"), std::string::npos);
}

TEST(WellSpecified, ShapesAndDeterminism) {
  const auto p = well_specified_problem(5, 50, 3, 0.5);
  EXPECT_EQ(p.X.rows(), 50);
  EXPECT_EQ(p.X.cols(), 3);
  EXPECT_EQ(p.x_new.size(), 3);
  const auto q = well_specified_problem(5, 50, 3, 0.5);
  EXPECT_TRUE(p.X == q.X);
  EXPECT_EQ(p.y_new, q.y_new);
  const Eigen::VectorXd r = p.y - p.X * p.w;
  EXPECT_NEAR(std::sqrt(r.squaredNorm() / 50.0), 0.5, 0.15);
}

TEST(DeriveSeed, DistinctStreams) {
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
  EXPECT_EQ(derive_seed(9, {4, 5}), derive_seed(9, {4, 5}));
}
