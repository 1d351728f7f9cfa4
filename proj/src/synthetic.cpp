#include "cidcast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>
#include <stdexcept>

#include "cidcast/csv.hpp"

namespace cidcast {

namespace chr = std::chrono;

namespace {

using Rng = std::mt19937_64;

double hours_between(Timestamp a, Timestamp b) { return chr::duration<double, std::ratio<3600>>(b - a).count(); }

Timestamp after_hours(Timestamp t, double h) {
  return t + chr::milliseconds{static_cast<long long>(std::llround(h * 3.6e6))};
}

double round_to(double v, double step) { return std::round(v / step) * step; }

// Shape of the hourly day-ahead profile: night trough, morning and evening peaks.
double hourly_profile(int h) {
  const double x = 2.0 * std::numbers::pi * h / 24.0;
  return -0.6 * std::cos(x) - 0.4 * std::cos(2.0 * x - 1.0);
}

struct Energy {
  double cons_da, sol_da, won_da, woff_da;
  double cons_id, sol_id, won_id, woff_id;
  double tot_da() const { return 0.97 * cons_da + 400.0; }
  double tot_id() const { return 0.97 * cons_id + 400.0; }
  double residual_da() const { return tot_da() - sol_da - won_da - woff_da; }
  double revision() const { return (sol_id - sol_da) + (won_id - won_da) + (woff_id - woff_da); }
};

struct HourState {
  ProductKey key;
  Energy e;
  double p_da = 0.0;
  double v_da = 0.0;
  double driver = 0.0;
};

void add_curves(CurveBook& book, const HourState& s, Rng& rng) {
  std::uniform_real_distribution<double> u(0.7, 1.3);
  const double V = s.v_da, P = s.p_da;
  const double a = u(rng), b = u(rng);
  AuctionCurve supply(CurveKind::Supply, {{V - 6000.0, P - 90.0 * a},
                                          {V - 2000.0, P - 20.0 * a},
                                          {V, P},
                                          {V + 1500.0, P + 25.0 * b},
                                          {V + 5000.0, P + 250.0 * b}});
  AuctionCurve demand(CurveKind::Demand, {{V - 5000.0, P + 400.0 * b},
                                          {V - 800.0, P + 45.0 * b},
                                          {V, P},
                                          {V + 1200.0, P - 60.0 * a},
                                          {V + 4000.0, P - 500.0 * a}});
  book.add(s.key, std::move(supply), std::move(demand));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  for (auto p : parts) h = mix(h ^ p);
  return h;
}

void validate(const SynthConfig& c) {
  if (c.days < 1) throw std::invalid_argument("synth: days must be positive");
  if (!(c.ar > -1.0 && c.ar < 1.0)) throw std::invalid_argument("synth: AR coefficient must lie in (-1, 1)");
  if (!(c.driver_ar > -1.0 && c.driver_ar < 1.0)) throw std::invalid_argument("synth: driver AR must lie in (-1, 1)");
  if (!(c.trades_per_product > 0.0)) throw std::invalid_argument("synth: trade intensity must be positive");
  if (!(c.ramp_hours > 0.0)) throw std::invalid_argument("synth: ramp must be positive");
  if (c.jump_rate < 0.0 || c.flat_share < 0.0 || c.flat_share > 1.0) throw std::invalid_argument("synth: bad rates");
  if (!(c.volume_mean > 0.0)) throw std::invalid_argument("synth: volume mean must be positive");
  if (c.decoys < 0 || !(c.decoy_correlation >= 0.0 && c.decoy_correlation < 1.0)) {
    throw std::invalid_argument("synth: bad decoy settings");
  }
}

SynthData generate(const SynthConfig& c) {
  validate(c);
  SynthData out;
  out.config = c;

  // Day-level sequences are drawn in order from one stream; trades use a
  // stream per product.
  Rng rng(derive_seed(c.seed, {1}));
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;

  std::vector<HourState> hours;
  double ar_state = 0.0, driver = 0.0, wind = 0.0;
  const double rho = std::sqrt(c.decoy_correlation);
  const double spread = std::sqrt(1.0 - c.decoy_correlation);
  for (int di = 0; di < c.days; ++di) {
    const Date day = c.start + chr::days{di};
    const unsigned wd = chr::weekday{day}.iso_encoding() - 1;
    const double weekend = wd >= 5 ? (wd == 6 ? -1.0 : -0.6) : 0.0;
    const double cloud = 0.3 + 0.7 * u(rng);
    wind = 0.8 * wind + 0.6 * z(rng);
    const double wind_level = std::max(0.05, 1.0 + 0.5 * wind);
    for (int h = 0; h < 24; ++h) {
      HourState s;
      s.key = {day, h};
      auto& e = s.e;
      e.cons_da = c.consumption + c.consumption_amplitude * hourly_profile(h) +
                  0.12 * c.consumption * weekend + 800.0 * z(rng);
      const double sun = std::max(0.0, std::sin(std::numbers::pi * (h - 5.0) / 15.0));
      e.sol_da = c.solar_peak * sun * cloud;
      e.won_da = c.wind_onshore * wind_level * (1.0 + 0.05 * z(rng));
      e.woff_da = c.wind_offshore * wind_level * (1.0 + 0.05 * z(rng));
      e.cons_id = e.cons_da * (1.0 + 0.01 * z(rng));
      e.sol_id = std::max(0.0, e.sol_da * (1.0 + c.intraday_error * z(rng)));
      e.won_id = std::max(0.0, e.won_da * (1.0 + c.intraday_error * z(rng)));
      e.woff_id = std::max(0.0, e.woff_da * (1.0 + c.intraday_error * z(rng)));

      ar_state = c.ar * ar_state + c.ar_sigma * std::sqrt(1.0 - c.ar * c.ar) * z(rng);
      const double jump = u(rng) < c.jump_rate ? c.jump_size * (u(rng) < 0.7 ? 1.0 : -1.0) : 0.0;
      s.p_da = round_to(c.level + c.daily_amplitude * hourly_profile(h) + c.weekly_amplitude * weekend +
                            c.w_residual_load * (e.residual_da() - 0.6 * c.consumption) + ar_state + jump,
                        0.01);
      s.v_da = round_to(0.3 * e.cons_da, 0.1);

      driver = c.driver_ar * driver + std::sqrt(1.0 - c.driver_ar * c.driver_ar) * z(rng);
      s.driver = driver;
      auto& cov = out.covariates;
      cov.add("P_da", s.key, s.p_da, Availability::Auction);
      cov.add("V_da", s.key, s.v_da, Availability::Auction);
      cov.add("E_cons_da", s.key, round_to(e.cons_da, 0.1), Availability::DayAhead);
      cov.add("E_sol_da", s.key, round_to(e.sol_da, 0.1), Availability::DayAhead);
      cov.add("E_won_da", s.key, round_to(e.won_da, 0.1), Availability::DayAhead);
      cov.add("E_woff_da", s.key, round_to(e.woff_da, 0.1), Availability::DayAhead);
      cov.add("E_tot_da", s.key, round_to(e.tot_da(), 0.1), Availability::DayAhead);
      cov.add("E_cons_id", s.key, round_to(e.cons_id, 0.1), Availability::Intraday);
      cov.add("E_sol_id", s.key, round_to(e.sol_id, 0.1), Availability::Intraday);
      cov.add("E_won_id", s.key, round_to(e.won_id, 0.1), Availability::Intraday);
      cov.add("E_woff_id", s.key, round_to(e.woff_id, 0.1), Availability::Intraday);
      cov.add("E_tot_id", s.key, round_to(e.tot_id(), 0.1), Availability::Intraday);
      cov.add("driver", s.key, driver, Availability::DayAhead);
      for (int k = 1; k <= c.decoys; ++k) {
        cov.add("decoy_" + std::to_string(k), s.key, rho * driver + spread * z(rng), Availability::DayAhead);
      }
      hours.push_back(s);
    }
    out.covariates.add("holiday", {day, 0}, wd == 6 ? 1.0 : 0.0, Availability::Static);
  }

  // Consumption value of a product as known at time t.
  auto consumption_at = [&](std::size_t idx, Timestamp t) {
    const auto& s = hours[idx];
    const double v = t >= available_from(Availability::Intraday, s.key) ? s.e.cons_id : s.e.cons_da;
    return round_to(v, 0.1);
  };

  int next_id = 0;
  for (std::size_t idx = 0; idx < hours.size(); ++idx) {
    const auto& s = hours[idx];
    if (!is_canonical(s.key)) continue;
    Rng prng(derive_seed(c.seed, {2, static_cast<std::uint64_t>(s.key.day.time_since_epoch().count()),
                                  static_cast<std::uint64_t>(s.key.hour)}));
    add_curves(out.curves, s, prng);

    const auto period = delivery_period(s.key);
    const Timestamp open = local_to_utc(at_local(s.key.day - chr::days{1}, chr::hours{15}));
    const Timestamp gate = gate_closure(s.key);
    const Timestamp revision_time = available_from(Availability::Intraday, s.key);
    const Timestamp final_hour = period.start - chr::hours{1};
    const double session = hours_between(open, gate);

    // Arrival times: ramp toward the gate plus an even background.
    std::poisson_distribution<int> count(c.trades_per_product);
    const int n = count(prng);
    std::vector<double> ages;  // hours before the gate
    const double tail = 1.0 - std::exp(-session / c.ramp_hours);
    for (int i = 0; i < n; ++i) {
      if (u(prng) < c.flat_share) {
        ages.push_back(session * u(prng));
      } else {
        ages.push_back(-c.ramp_hours * std::log(1.0 - u(prng) * tail));
      }
    }
    std::sort(ages.begin(), ages.end(), std::greater<>());

    auto deterministic = [&](Timestamp t) {
      double f = s.p_da;
      if (t >= revision_time) f += c.w_shift * s.e.revision();
      if (idx > 0) f += c.w_delta_consumption * (consumption_at(idx, t) - consumption_at(idx - 1, t));
      if (t >= final_hour) f += c.w_driver * s.driver;
      return f;
    };

    std::gamma_distribution<double> vol(2.0, c.volume_mean / 2.0);
    double walk = 0.0;
    double last_age = session;
    LatentProduct lp;
    lp.key = s.key;
    lp.p_da = s.p_da;
    lp.v_da = s.v_da;
    lp.driver = s.driver;
    auto emit = [&](const std::string& id, double price, double volume, Timestamp t, SelfTrade st, Timestamp ds,
                    Timestamp de) {
      Transaction tx;
      tx.trade_id = id;
      tx.price = price;
      tx.volume = volume;
      tx.execution_time = t;
      tx.delivery_start = ds;
      tx.delivery_end = de;
      tx.self_trade = st;
      tx.market_area = "DE";
      const bool buy_first = u(prng) < 0.5;
      tx.side = buy_first ? Side::Buy : Side::Sell;
      out.transactions.push_back(tx);
      tx.side = buy_first ? Side::Sell : Side::Buy;
      out.transactions.push_back(tx);
    };
    for (double age : ages) {
      walk += c.random_walk_sigma * std::sqrt(std::max(0.0, last_age - age)) * z(prng);
      last_age = age;
      const Timestamp t = after_hours(gate, -age);
      const double price = round_to(deterministic(t) + walk + c.microstructure_sigma * z(prng), 0.01);
      const double volume = std::max(0.1, round_to(vol(prng), 0.1));
      const SelfTrade flag = u(prng) < c.unknown_flag_share ? SelfTrade::Unknown : SelfTrade::No;
      const std::string id = "T" + std::to_string(next_id++);
      emit(id, price, volume, t, flag, period.start, period.end);
      if (u(prng) < c.duplicate_share) emit(id, price, volume, t, flag, period.start, period.end);
      if (u(prng) < c.self_trade_share) {
        emit("T" + std::to_string(next_id++), price + 20.0 * z(prng), volume, t, SelfTrade::Yes, period.start,
             period.end);
      }
      if (u(prng) < c.block_share) {
        emit("T" + std::to_string(next_id++), price + 5.0 * z(prng), 3.0 * volume, t, SelfTrade::No, period.start,
             period.start + chr::hours{3});
      }
      ++lp.trades;
    }
    walk += c.random_walk_sigma * std::sqrt(std::max(0.0, last_age)) * z(prng);
    lp.fair_at_gate = deterministic(gate) + walk;
    out.latent.push_back(lp);
  }
  return out;
}

std::string truth_json(const SynthData& data) {
  const auto& c = data.config;
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["start"] = format_date(c.start);
  j["days"] = c.days;
  j["day_ahead"] = {{"level", c.level},
                    {"daily_amplitude", c.daily_amplitude},
                    {"weekly_amplitude", c.weekly_amplitude},
                    {"ar", c.ar},
                    {"ar_sigma", c.ar_sigma},
                    {"jump_rate", c.jump_rate},
                    {"jump_size", c.jump_size},
                    {"w_residual_load", c.w_residual_load}};
  j["intraday"] = {{"trades_per_product", c.trades_per_product},
                   {"ramp_hours", c.ramp_hours},
                   {"flat_share", c.flat_share},
                   {"random_walk_sigma", c.random_walk_sigma},
                   {"microstructure_sigma", c.microstructure_sigma}};
  // Effects on the intraday price path and the feature each one loads on.
  j["effects"] = nlohmann::ordered_json::array(
      {{{"feature", "shift:renewables"}, {"weight", c.w_shift}, {"from", "08:00 on the delivery day"}},
       {{"feature", "dh:E_cons"}, {"weight", c.w_delta_consumption}, {"from", "always"}},
       {{"feature", "driver"}, {"weight", c.w_driver}, {"from", "one hour before delivery"}}});
  j["decoys"] = {{"count", c.decoys}, {"pairwise_correlation", c.decoy_correlation}};
  std::size_t trades = 0;
  for (const auto& lp : data.latent) trades += lp.trades;
  j["products"] = data.latent.size();
  j["eligible_trades"] = trades;
  return j.dump(2) + "\n";
}

void write_synthetic(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("transactions.csv");
    write_transactions(f, data.transactions);
  }
  {
    auto f = open("curves.csv");
    data.curves.write(f);
  }
  {
    auto f = open("covariates.csv");
    data.covariates.write(f);
  }
  {
    auto f = open("latent.csv");
    f << "date,hour,p_da,v_da,driver,fair_at_gate,trades\n";
    for (const auto& lp : data.latent) {
      f << format_date(lp.key.day) << ',' << lp.key.hour << ',' << csv::format_double(lp.p_da) << ','
        << csv::format_double(lp.v_da) << ',' << csv::format_double(lp.driver) << ','
        << csv::format_double(lp.fair_at_gate) << ',' << lp.trades << '\n';
    }
  }
  auto f = open("truth.json");
  f << truth_json(data);
}

RegressionProblem well_specified_problem(std::uint64_t seed, int n, int m, double sigma) {
  if (n < 2 || m < 1) throw std::invalid_argument("well_specified_problem: need n >= 2 and m >= 1");
  Rng rng(seed);
  std::normal_distribution<double> z;
  RegressionProblem p;
  p.sigma = sigma;
  p.w.resize(m);
  for (int j = 0; j < m; ++j) p.w(j) = z(rng);
  Eigen::MatrixXd all(n + 1, m);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j < m; ++j) all(i, j) = z(rng);
  Eigen::VectorXd y = all * p.w;
  for (int i = 0; i <= n; ++i) y(i) += sigma * z(rng);
  p.X = all.topRows(n);
  p.y = y.head(n);
  p.x_new = all.row(n).transpose();
  p.y_new = y(n);
  return p;
}

}  // namespace cidcast
