#include "cidcast/feature_factory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace cidcast {

namespace chr = std::chrono;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double value_or_nan(const std::optional<double>& v) { return v ? *v : kNaN; }

std::string delta_label(double delta) { return std::to_string(std::llround(delta)); }

ProductKey previous_hour(const ProductKey& key) {
  if (key.hour > 0) return {key.day, key.hour - 1};
  return {key.day - chr::days{1}, 23};
}

const std::array<const char*, 5> kEnergy{"cons", "sol", "won", "woff", "tot"};
const std::array<const char*, 9> kLive{"P_id1", "P_id3", "P_idfull", "P_high", "P_low",
                                       "P_last", "P_deviat", "V_buy", "V_sell"};

std::array<double, 9> live_values(const LiveStats& s) {
  return {value_or_nan(s.id1),  value_or_nan(s.id3),  value_or_nan(s.idfull), value_or_nan(s.high), value_or_nan(s.low),
          value_or_nan(s.last), value_or_nan(s.deviat), s.v_buy,               s.v_sell};
}

bool is_consumed(const std::string& name) {
  static const std::set<std::string> fixed{"P_da", "P_da_che", "V_da", "P_da_q1", "P_da_q2", "P_da_q3", "P_da_q4"};
  if (fixed.count(name)) return true;
  for (const char* x : kEnergy) {
    for (const char* src : {"_da", "_id"}) {
      std::string base = std::string("E_") + x + src;
      if (name == base) return true;
      for (int q = 1; q <= 4; ++q) {
        if (name == base + "_q" + std::to_string(q)) return true;
      }
    }
  }
  return false;
}

}  // namespace

std::vector<HourGroup> default_hour_groups() {
  auto range = [](int lo, int hi) {
    std::vector<int> out;
    for (int h = lo; h <= hi; ++h) out.push_back(h);
    return out;
  };
  std::vector<int> off_peak = range(0, 7);
  for (int h = 20; h <= 23; ++h) off_peak.push_back(h);
  return {
      {"middle_night", range(0, 3)},  {"early_morning", range(4, 7)}, {"late_morning", range(8, 11)},
      {"early_afternoon", range(12, 15)}, {"rush_hour", range(16, 19)}, {"night", range(0, 5)},
      {"morning", range(6, 9)},        {"high_noon", range(10, 13)},  {"afternoon", range(14, 17)},
      {"evening", range(18, 23)},      {"off_peak", off_peak},        {"sunpeak", range(10, 15)},
      {"baseload", range(0, 23)},      {"peakload", range(8, 19)},
  };
}

Timestamp shift_days(Timestamp tau, int days) {
  Timestamp guess = tau + chr::days{days};
  return guess + (berlin_offset(tau) - berlin_offset(guess));
}

struct FeatureFactory::Sink {
  std::vector<std::string>* names = nullptr;
  std::vector<double> values;

  void put(const std::string& name, double v) {
    if (names) names->push_back(name);
    values.push_back(v);
  }
};

FeatureFactory::FeatureFactory(const TradeBook& trades, const CurveBook& curves, const CovariateStore& covariates,
                               FeatureConfig config)
    : trades_(trades), curves_(curves), covariates_(covariates), config_(std::move(config)) {
  for (const auto& name : covariates_.names()) {
    if (!is_consumed(name)) passthrough_.push_back(name);
  }
  Sink probe;
  probe.names = &base_names_;
  compute({Date{chr::days{0}}, 12}, Timestamp{}, probe);
  names_ = base_names_;
  for (const auto& n : base_names_) names_.push_back("dh:" + n);
  for (const auto& n : base_names_) names_.push_back("dd:" + n);
}

void FeatureFactory::compute(const ProductKey& key, Timestamp tau, Sink& out) const {
  auto cov = [&](const std::string& name, const ProductKey& k) {
    return value_or_nan(covariates_.get(name, k, tau));
  };
  const bool has_trades = !trades_.empty();
  const bool has_curves = !curves_.empty();
  const bool has_pda = covariates_.has("P_da");
  const bool has_vda = covariates_.has("V_da");

  // Day-ahead market.
  const double p_da = cov("P_da", key);
  const double v_da = cov("V_da", key);
  if (has_pda) out.put("P_da", p_da);
  if (covariates_.has("P_da_che")) out.put("P_da_che", cov("P_da_che", key));
  if (has_vda) out.put("V_da", v_da);
  if (covariates_.has("P_da_q1")) {
    std::array<double, 4> q{};
    for (int i = 0; i < 4; ++i) {
      q[i] = cov("P_da_q" + std::to_string(i + 1), key);
      out.put("P_da_q" + std::to_string(i + 1), q[i]);
    }
    out.put("s15:P_da", (q[3] - q[0]) / 3.0);
  }

  const CurveBook::Entry* curve = has_curves ? curves_.find(key) : nullptr;
  const bool curve_known = curve && available_from(Availability::Auction, key) <= tau;
  std::vector<double> eta_da(config_.slope_deltas.size(), kNaN);
  if (has_curves) {
    for (std::size_t i = 0; i < config_.slope_deltas.size(); ++i) {
      if (curve_known) eta_da[i] = slope_at(curve->transformed, curve->clear.volume, config_.slope_deltas[i]);
      out.put("eta_da:" + delta_label(config_.slope_deltas[i]), eta_da[i]);
    }
  }

  if (has_pda) {
    std::array<double, 24> day{};
    std::array<double, 24> vol{};
    for (int h = 0; h < 24; ++h) {
      day[h] = cov("P_da", {key.day, h});
      vol[h] = has_vda ? cov("V_da", {key.day, h}) : kNaN;
    }
    for (const auto& g : config_.hour_groups) {
      double sum = 0.0;
      for (int h : g.hours) sum += day[static_cast<std::size_t>(h)];
      out.put("P_da_grp:" + g.name, g.hours.empty() ? kNaN : sum / static_cast<double>(g.hours.size()));
    }
    double hi = -INFINITY, lo = INFINITY;
    bool any_nan = false;
    for (double p : day) {
      any_nan |= std::isnan(p);
      hi = std::max(hi, p);
      lo = std::min(lo, p);
    }
    out.put("P_da_max", any_nan ? kNaN : hi);
    out.put("P_da_min", any_nan ? kNaN : lo);
    if (has_vda) {
      double pv = 0.0, v = 0.0;
      for (int h = 0; h < 24; ++h) {
        pv += day[h] * vol[h];
        v += vol[h];
      }
      out.put("P_da_vwa", v > 0.0 ? pv / v : kNaN);
    }
  }

  // Continuous intraday, live at tau and final values of the previous day.
  std::array<double, 9> live{};
  live.fill(kNaN);
  LiveStats live_raw;
  if (has_trades) {
    live_raw = live_stats(trades_.trades(key), key, tau);
    live = live_values(live_raw);
    for (std::size_t i = 0; i < kLive.size(); ++i) out.put(kLive[i], live[i]);
    const ProductKey prev{key.day - chr::days{1}, key.hour};
    const auto prev_stats = live_stats(trades_.trades(prev), prev, std::min(tau, gate_closure(prev)));
    const auto eod = live_values(prev_stats);
    for (std::size_t i = 0; i < kLive.size(); ++i) out.put(std::string("eod:") + kLive[i], eod[i]);
  }
  std::vector<double> eta_cid(config_.slope_deltas.size(), kNaN);
  if (has_curves && has_trades) {
    const auto& anchor = config_.eta_anchor == EtaAnchor::LiveIdFull ? live_raw.idfull : live_raw.id1;
    for (std::size_t i = 0; i < config_.slope_deltas.size(); ++i) {
      if (curve_known && anchor) {
        eta_cid[i] = slope_at(curve->transformed, curve->transformed.volume_at(*anchor), config_.slope_deltas[i]);
      }
      out.put("eta_cid:" + delta_label(config_.slope_deltas[i]), eta_cid[i]);
    }
  }

  // Energy forecasts: intraday values replace day-ahead ones once published.
  std::array<double, 5> energy{};
  std::array<double, 5> energy_da{};
  std::array<double, 5> energy_id{};
  std::array<bool, 5> present{};
  for (std::size_t i = 0; i < kEnergy.size(); ++i) {
    const std::string da = std::string("E_") + kEnergy[i] + "_da";
    const std::string id = std::string("E_") + kEnergy[i] + "_id";
    energy_da[i] = cov(da, key);
    energy_id[i] = cov(id, key);
    energy[i] = std::isnan(energy_id[i]) ? energy_da[i] : energy_id[i];
    present[i] = covariates_.has(da) || covariates_.has(id);
    if (present[i]) out.put(std::string("E_") + kEnergy[i], energy[i]);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string da = std::string("E_") + kEnergy[i] + "_da_q";
    const std::string id = std::string("E_") + kEnergy[i] + "_id_q";
    if (!covariates_.has(da + "1") && !covariates_.has(id + "1")) continue;
    double slope = (cov(id + "4", key) - cov(id + "1", key)) / 3.0;
    if (std::isnan(slope)) slope = (cov(da + "4", key) - cov(da + "1", key)) / 3.0;
    out.put(std::string("s15:E_") + kEnergy[i], slope);
  }

  // Calendar.
  const chr::year_month_day ymd{key.day};
  const unsigned wd = chr::weekday{key.day}.iso_encoding() - 1;  // Mon = 0
  out.put("T_h", key.hour);
  out.put("T_wd", wd);
  out.put("T_m", static_cast<unsigned>(ymd.month()));
  out.put("T_y", static_cast<int>(ymd.year()));
  out.put("T_wc", wd < 5 ? 0.0 : (wd == 5 ? 1.0 : 2.0));
  const auto local_tau = chr::local_time<chr::milliseconds>{(tau + berlin_offset(tau)).time_since_epoch()};
  out.put("T_deliv", static_cast<double>((nominal_start(key) - local_tau).count()) / 3.6e6);

  for (const auto& name : passthrough_) out.put(name, cov(name, key));

  // Combinations of the above.
  const double v_cid = 0.5 * (live[7] + live[8]);
  if (has_trades) {
    out.put("V_cid", v_cid);
    if (has_pda) out.put("P_idfull-P_da", live[2] - p_da);
    if (has_vda) out.put("V_cid-V_da", v_cid - v_da);
  }
  if (has_curves && has_trades) {
    for (std::size_t i = 0; i < config_.slope_deltas.size(); ++i) {
      out.put("eta_cid-eta_da:" + delta_label(config_.slope_deltas[i]), eta_cid[i] - eta_da[i]);
    }
  }
  const bool renewables = present[1] && present[2] && present[3];
  auto excess = [&](const std::string& name, double value) {
    out.put(name, value);
    if (has_vda) out.put(name + "-V_da", value - v_da);
    if (has_trades) out.put(name + "-V_cid", value - v_cid);
  };
  if (present[4]) {
    if (has_vda) out.put("E_tot-V_da", energy[4] - v_da);
    if (has_trades) out.put("E_tot-V_cid", energy[4] - v_cid);
    if (renewables) excess("E_res", energy[4] - energy[1] - energy[2] - energy[3]);
  }
  if (present[0]) {
    if (has_vda) out.put("E_cons-V_da", energy[0] - v_da);
    if (has_trades) out.put("E_cons-V_cid", energy[0] - v_cid);
    if (renewables) excess("C_res", energy[0] - energy[1] - energy[2] - energy[3]);
  }
  auto both = [&](std::size_t i) {
    const std::string base = std::string("E_") + kEnergy[i];
    return covariates_.has(base + "_da") && covariates_.has(base + "_id");
  };
  auto shift = [&](std::size_t i) { return energy_id[i] - energy_da[i]; };
  if (both(1)) out.put("shift:sol", shift(1));
  if (both(2) && both(3)) out.put("shift:wind", shift(2) + shift(3));
  if (both(1) && both(2) && both(3)) out.put("shift:renewables", shift(1) + shift(2) + shift(3));
}

const std::vector<double>& FeatureFactory::base(const ProductKey& key, Timestamp tau) const {
  const CacheKey ck{key, tau};
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(ck);
    if (it != cache_.end()) return it->second;
  }
  Sink sink;
  sink.values.reserve(base_names_.size());
  compute(key, tau, sink);
  std::lock_guard lock(cache_mutex_);
  return cache_.try_emplace(ck, std::move(sink.values)).first->second;
}

FeatureRow FeatureFactory::assemble_row(const ProductKey& key, Timestamp tau) const {
  FeatureRow row;
  row.key = key;
  row.tau = tau;
  row.values = base(key, tau);
  row.target = target(key);
  return row;
}

std::vector<double> FeatureFactory::lagged_row(const ProductKey& key, Timestamp tau) const {
  const auto& b = base(key, tau);
  const auto& bh = base(previous_hour(key), tau);
  const auto& bd = base({key.day - chr::days{1}, key.hour}, shift_days(tau, -1));
  std::vector<double> out;
  out.reserve(3 * b.size());
  out.insert(out.end(), b.begin(), b.end());
  for (std::size_t i = 0; i < b.size(); ++i) out.push_back(b[i] - bh[i]);
  for (std::size_t i = 0; i < b.size(); ++i) out.push_back(b[i] - bd[i]);
  return out;
}

std::optional<double> FeatureFactory::target(const ProductKey& key) const {
  return eod_stats(trades_.trades(key), key).idfull;
}

DesignMatrix FeatureFactory::build_design(const ProductKey& key, Timestamp tau, int n) const {
  if (n < config_.min_history) {
    throw std::invalid_argument("insufficient history: n = " + std::to_string(n) + " < " +
                                std::to_string(config_.min_history));
  }
  if (tau >= gate_closure(key)) throw std::invalid_argument("creation time is not before gate closure");
  DesignMatrix d;
  d.target = key;
  d.tau = tau;
  d.names = names_;
  d.X.resize(n + 1, static_cast<Eigen::Index>(names_.size()));
  d.y.resize(n + 1);
  for (int k = n; k >= 0; --k) {
    const Eigen::Index row = n - k;
    const ProductKey rk{key.day - chr::days{k}, key.hour};
    const auto values = lagged_row(rk, shift_days(tau, -k));
    d.X.row(row) = Eigen::Map<const Eigen::RowVectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    d.y(row) = k == 0 ? kNaN : value_or_nan(target(rk));
    d.days.push_back(rk.day);
  }
  d.y_true = target(key);
  return d;
}

CleanDesign clean_and_standardise(const DesignMatrix& design, const CleaningOptions& options,
                                  const std::vector<Eigen::Index>* subset) {
  const Eigen::Index n_train = design.training_rows();
  const Eigen::Index pred = n_train;
  std::vector<Eigen::Index> candidates;
  if (subset) {
    candidates = *subset;
  } else {
    for (Eigen::Index j = 0; j < design.X.cols(); ++j) candidates.push_back(j);
  }

  std::vector<Eigen::Index> cols;
  for (Eigen::Index j : candidates) {
    if (std::isnan(design.X(pred, j))) continue;
    Eigen::Index missing = 0;
    for (Eigen::Index i = 0; i < n_train; ++i) missing += std::isnan(design.X(i, j)) ? 1 : 0;
    if (static_cast<double>(missing) > options.max_missing_fraction * static_cast<double>(n_train)) continue;
    cols.push_back(j);
  }

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n_train; ++i) {
    if (!std::isfinite(design.y(i))) continue;
    bool ok = true;
    for (Eigen::Index j : cols) {
      if (!std::isfinite(design.X(i, j))) {
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(i);
  }
  if (rows.size() < 2) throw std::runtime_error("cleaning left fewer than two training rows");
  const auto n = static_cast<Eigen::Index>(rows.size());

  CleanDesign out;
  out.rows = rows;
  std::vector<double> means, stds;
  for (Eigen::Index j : cols) {
    double mean = 0.0;
    for (Eigen::Index i : rows) mean += design.X(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (Eigen::Index i : rows) var += (design.X(i, j) - mean) * (design.X(i, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > options.zero_variance_tol * std::max(1.0, std::abs(mean)))) continue;
    out.columns.push_back(j);
    out.names.push_back(design.names[static_cast<std::size_t>(j)]);
    means.push_back(mean);
    stds.push_back(sd);
  }
  const auto m = static_cast<Eigen::Index>(out.columns.size());
  out.x_mean = Eigen::Map<Eigen::VectorXd>(means.data(), m);
  out.x_std = Eigen::Map<Eigen::VectorXd>(stds.data(), m);
  out.X.resize(n, m);
  out.x_new.resize(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const Eigen::Index j = out.columns[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < n; ++r) out.X(r, c) = (design.X(rows[r], j) - out.x_mean(c)) / out.x_std(c);
    out.x_new(c) = (design.X(pred, j) - out.x_mean(c)) / out.x_std(c);
  }

  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) y(r) = design.y(rows[r]);
  out.y_mean = y.mean();
  const double y_sd = std::sqrt((y.array() - out.y_mean).square().mean());
  out.y_std = y_sd > 0.0 ? y_sd : 1.0;
  out.y = (y.array() - out.y_mean) / out.y_std;
  return out;
}

}  // namespace cidcast
