#include "cidcast/market_data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "cidcast/csv.hpp"

namespace cidcast {

namespace chr = std::chrono;

namespace {

Side parse_side(std::string_view s) {
  if (s == "BUY" || s == "Buy" || s == "buy" || s == "B") return Side::Buy;
  if (s == "SELL" || s == "Sell" || s == "sell" || s == "S") return Side::Sell;
  throw std::invalid_argument("unknown side '" + std::string(s) + "'");
}

SelfTrade parse_self_trade(std::string_view s) {
  if (s == "Y") return SelfTrade::Yes;
  if (s == "N") return SelfTrade::No;
  if (s == "U") return SelfTrade::Unknown;
  throw std::invalid_argument("unknown SelfTrade flag '" + std::string(s) + "'");
}

const char* side_name(Side s) { return s == Side::Buy ? "BUY" : "SELL"; }

const char* self_trade_name(SelfTrade s) {
  switch (s) {
    case SelfTrade::Yes: return "Y";
    case SelfTrade::No: return "N";
    case SelfTrade::Unknown: return "U";
  }
  return "U";
}

bool in_window(Timestamp t, Timestamp lo, Timestamp hi) { return t >= lo && t <= hi; }

std::optional<double> lerp(const std::optional<double>& a, const std::optional<double>& b, double frac) {
  if (a && b) return *a + (*b - *a) * frac;
  return std::nullopt;
}

}  // namespace

ParseReport parse_transactions(std::istream& in) {
  ParseReport report;
  std::string line;
  if (!csv::next_line(in, line)) throw std::runtime_error("transaction file is empty");
  csv::Header header(csv::split(line));
  const std::size_t c_id = header.require("TradeId");
  const std::size_t c_side = header.require("Side");
  const std::size_t c_price = header.require("Price");
  const std::size_t c_vol = header.require("Volume");
  const std::size_t c_exec = header.require("ExecutionTime");
  const std::size_t c_start = header.require("DeliveryStart");
  const std::size_t c_end = header.require("DeliveryEnd");
  const std::size_t c_self = header.require("SelfTrade");
  auto c_area = header.find("DeliveryArea");
  if (!c_area) c_area = header.find("MarketArea");
  auto c_product = header.find("Product");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = csv::split(line);
    try {
      if (f.size() < header.names().size()) throw std::invalid_argument("too few fields");
      Transaction t;
      t.trade_id = f[c_id];
      if (t.trade_id.empty()) throw std::invalid_argument("empty TradeId");
      t.side = parse_side(f[c_side]);
      t.price = csv::parse_double(f[c_price]);
      t.volume = csv::parse_double(f[c_vol]);
      if (!(t.volume > 0.0)) throw std::invalid_argument("non-positive volume");
      t.execution_time = parse_timestamp(f[c_exec]);
      t.delivery_start = parse_timestamp(f[c_start]);
      t.delivery_end = parse_timestamp(f[c_end]);
      if (!(t.delivery_start < t.delivery_end)) throw std::invalid_argument("delivery start not before end");
      t.self_trade = parse_self_trade(f[c_self]);
      if (c_area) t.market_area = f[*c_area];
      if (c_product) t.product = f[*c_product];
      report.transactions.push_back(std::move(t));
    } catch (const std::invalid_argument& e) {
      report.skipped.push_back({line_no, e.what()});
    }
  }
  return report;
}

ParseReport parse_transactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transaction file " + path.string());
  return parse_transactions(in);
}

void write_transactions(std::ostream& out, const std::vector<Transaction>& txs) {
  out << "TradeId,Side,Price,Volume,ExecutionTime,DeliveryStart,DeliveryEnd,SelfTrade,DeliveryArea,Product\n";
  for (const auto& t : txs) {
    out << t.trade_id << ',' << side_name(t.side) << ',' << csv::format_double(t.price) << ','
        << csv::format_double(t.volume) << ',' << format_timestamp(t.execution_time) << ','
        << format_timestamp(t.delivery_start) << ',' << format_timestamp(t.delivery_end) << ','
        << self_trade_name(t.self_trade) << ',' << t.market_area << ',' << t.product << '\n';
  }
}

std::vector<Transaction> filter_eligible(const std::vector<Transaction>& txs, const ProductKey& product) {
  const auto period = delivery_period(product);
  std::vector<Transaction> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : txs) {
    if (t.self_trade == SelfTrade::Yes) continue;
    if (t.delivery_start != period.start || t.delivery_end != period.end) continue;
    if (!seen.insert(t.trade_id).second) continue;
    out.push_back(t);
  }
  return out;
}

LiveStats live_stats(const std::vector<Transaction>& txs, const ProductKey& product, Timestamp tau) {
  const auto start = delivery_period(product).start;
  const Timestamp id3_lo = start - chr::hours{3};
  const Timestamp id1_lo = start - chr::hours{1};
  const Timestamp id_hi = start - chr::minutes{30};

  LiveStats s;
  s.creation_time = tau;
  double pv = 0.0, v = 0.0, psum = 0.0;
  double pv3 = 0.0, v3 = 0.0, pv1 = 0.0, v1 = 0.0;
  std::size_t count = 0;
  double high = 0.0, low = 0.0, last = 0.0;
  Timestamp last_time{};
  for (const auto& t : txs) {
    if (t.execution_time > tau) continue;
    if (count == 0) {
      high = low = t.price;
    } else {
      high = std::max(high, t.price);
      low = std::min(low, t.price);
    }
    if (count == 0 || t.execution_time >= last_time) {
      last = t.price;
      last_time = t.execution_time;
    }
    ++count;
    pv += t.price * t.volume;
    v += t.volume;
    psum += t.price;
    if (in_window(t.execution_time, id3_lo, id_hi)) {
      pv3 += t.price * t.volume;
      v3 += t.volume;
    }
    if (in_window(t.execution_time, id1_lo, id_hi)) {
      pv1 += t.price * t.volume;
      v1 += t.volume;
    }
    (t.side == Side::Buy ? s.v_buy : s.v_sell) += t.volume;
  }
  if (count == 0) return s;
  // A VWAP is a convex combination; clamping only removes rounding excursions.
  double vwap = std::clamp(pv / v, low, high);
  s.idfull = vwap;
  s.high = high;
  s.low = low;
  s.last = last;
  s.deviat = vwap - psum / static_cast<double>(count);
  if (v3 > 0.0) s.id3 = pv3 / v3;
  if (v1 > 0.0) s.id1 = pv1 / v1;
  return s;
}

LiveStats eod_stats(const std::vector<Transaction>& txs, const ProductKey& product) {
  return live_stats(txs, product, gate_closure(product));
}

LiveSeries build_live_series(const std::vector<Transaction>& txs, const ProductKey& product, int grid_size) {
  if (grid_size < 2) throw std::invalid_argument("grid_size must be at least 2");
  LiveSeries series;
  series.product = product;
  const Timestamp open = local_to_utc(at_local(product.day - chr::days{1}, chr::hours{15}));
  const Timestamp end = delivery_period(product).end;
  const auto span = (end - open).count();
  series.grid.reserve(grid_size);
  series.values.reserve(grid_size);
  for (int i = 0; i < grid_size; ++i) {
    auto offset = span * i / (grid_size - 1);
    Timestamp tau = open + chr::milliseconds{offset};
    series.grid.push_back(tau);
    series.values.push_back(live_stats(txs, product, tau));
  }
  return series;
}

LiveStats LiveSeries::at(Timestamp tau) const {
  LiveStats out;
  out.creation_time = tau;
  if (grid.empty() || tau < grid.front()) return out;
  if (tau >= grid.back()) {
    out = values.back();
    out.creation_time = tau;
    return out;
  }
  auto it = std::upper_bound(grid.begin(), grid.end(), tau);
  std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  std::size_t lo = hi - 1;
  double frac = static_cast<double>((tau - grid[lo]).count()) / static_cast<double>((grid[hi] - grid[lo]).count());
  const LiveStats& a = values[lo];
  const LiveStats& b = values[hi];

  auto field = [&](std::optional<double> LiveStats::*member) {
    if (auto v = lerp(a.*member, b.*member, frac)) return v;
    for (std::size_t i = lo + 1; i-- > 0;) {
      if ((values[i].*member).has_value()) return values[i].*member;
    }
    return std::optional<double>{};
  };
  out.id1 = field(&LiveStats::id1);
  out.id3 = field(&LiveStats::id3);
  out.idfull = field(&LiveStats::idfull);
  out.high = field(&LiveStats::high);
  out.low = field(&LiveStats::low);
  out.last = field(&LiveStats::last);
  out.deviat = field(&LiveStats::deviat);
  out.v_buy = a.v_buy + (b.v_buy - a.v_buy) * frac;
  out.v_sell = a.v_sell + (b.v_sell - a.v_sell) * frac;
  return out;
}

const LiveStats& LiveSeries::eod() const {
  const Timestamp gate = gate_closure(product);
  auto it = std::lower_bound(grid.begin(), grid.end(), gate);
  if (it == grid.end()) return values.back();
  return values[static_cast<std::size_t>(it - grid.begin())];
}

void write_live_series(std::ostream& out, const LiveSeries& series) {
  out << "tau,id1,id3,idfull,high,low,last,deviat,v_buy,v_sell\n";
  for (std::size_t i = 0; i < series.grid.size(); ++i) {
    const auto& s = series.values[i];
    out << format_timestamp(series.grid[i]) << ',' << csv::format_optional(s.id1) << ','
        << csv::format_optional(s.id3) << ',' << csv::format_optional(s.idfull) << ','
        << csv::format_optional(s.high) << ',' << csv::format_optional(s.low) << ','
        << csv::format_optional(s.last) << ',' << csv::format_optional(s.deviat) << ','
        << csv::format_double(s.v_buy) << ',' << csv::format_double(s.v_sell) << '\n';
  }
}

TradeBook::TradeBook(const std::vector<Transaction>& txs) {
  std::map<std::pair<Timestamp, Timestamp>, std::vector<Transaction>> groups;
  for (const auto& t : txs) {
    if (t.delivery_end - t.delivery_start != chr::hours{1}) continue;
    groups[{t.delivery_start, t.delivery_end}].push_back(t);
  }
  for (auto& [period, group] : groups) {
    ProductKey key;
    if (!product_for_period(period.first, period.second, key)) continue;
    auto eligible = filter_eligible(group, key);
    std::stable_sort(eligible.begin(), eligible.end(), [](const Transaction& a, const Transaction& b) {
      return a.execution_time < b.execution_time;
    });
    by_period_.emplace(period, std::move(eligible));
  }
}

const std::vector<Transaction>& TradeBook::trades(const ProductKey& product) const {
  static const std::vector<Transaction> empty;
  auto p = delivery_period(product);
  auto it = by_period_.find({p.start, p.end});
  return it == by_period_.end() ? empty : it->second;
}

std::vector<ProductKey> TradeBook::products() const {
  std::vector<ProductKey> out;
  for (const auto& [period, trades] : by_period_) {
    ProductKey key;
    if (!product_for_period(period.first, period.second, key)) continue;
    out.push_back(key);
    if (key.hour == 3 && is_spring_change_day(key.day)) out.push_back({key.day, 2});
  }
  std::sort(out.begin(), out.end());
  return out;
}

TradeBook TradeBook::truncated(Timestamp cutoff) const {
  TradeBook out;
  for (const auto& [period, trades] : by_period_) {
    std::vector<Transaction> kept;
    for (const auto& t : trades) {
      if (t.execution_time <= cutoff) kept.push_back(t);
    }
    out.by_period_.emplace(period, std::move(kept));
  }
  return out;
}

}  // namespace cidcast
