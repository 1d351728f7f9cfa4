#include "cidcast/merit_order.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "cidcast/csv.hpp"

namespace cidcast {

namespace {

double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Appends the intersection of segments [p0,p1] and [q0,q1] (points or the
// two ends of a collinear overlap).
void intersect_segments(const CurvePoint& p0, const CurvePoint& p1, const CurvePoint& q0, const CurvePoint& q1,
                        double eps, std::vector<CurvePoint>& out) {
  const double rx = p1.volume - p0.volume, ry = p1.price - p0.price;
  const double sx = q1.volume - q0.volume, sy = q1.price - q0.price;
  const double qpx = q0.volume - p0.volume, qpy = q0.price - p0.price;
  const double denom = cross(rx, ry, sx, sy);
  const double scale = std::max({std::hypot(rx, ry), std::hypot(sx, sy), 1.0});
  if (std::abs(denom) <= eps * scale * scale) {
    if (std::abs(cross(qpx, qpy, rx, ry)) > eps * scale * scale) return;  // parallel, disjoint
    const double rr = rx * rx + ry * ry;
    if (rr == 0.0) {
      // Degenerate first segment: a point; check whether it lies on q.
      const double ss = sx * sx + sy * sy;
      double t = ss == 0.0 ? 0.0 : -(qpx * sx + qpy * sy) / ss;
      if (t >= -eps && t <= 1.0 + eps &&
          std::hypot(q0.volume + t * sx - p0.volume, q0.price + t * sy - p0.price) <= eps * scale) {
        out.push_back(p0);
      }
      return;
    }
    double t0 = (qpx * rx + qpy * ry) / rr;
    double t1 = t0 + (sx * rx + sy * ry) / rr;
    if (t0 > t1) std::swap(t0, t1);
    double lo = std::max(t0, 0.0), hi = std::min(t1, 1.0);
    if (lo > hi + eps) return;
    out.push_back({p0.volume + lo * rx, p0.price + lo * ry});
    out.push_back({p0.volume + hi * rx, p0.price + hi * ry});
    return;
  }
  const double t = cross(qpx, qpy, sx, sy) / denom;
  const double u = cross(qpx, qpy, rx, ry) / denom;
  if (t < -eps || t > 1.0 + eps || u < -eps || u > 1.0 + eps) return;
  CurvePoint hit{p0.volume + t * rx, p0.price + t * ry};
  // Keep horizontal and vertical pieces exact.
  if (sy == 0.0) hit.price = q0.price;
  if (sx == 0.0) hit.volume = q0.volume;
  out.push_back(hit);
}

CurveKind parse_kind(std::string_view s) {
  if (s == "supply" || s == "SUPPLY" || s == "SEP" || s == "sell") return CurveKind::Supply;
  if (s == "demand" || s == "DEMAND" || s == "DEM" || s == "buy") return CurveKind::Demand;
  throw std::invalid_argument("unknown curve kind '" + std::string(s) + "'");
}

}  // namespace

AuctionCurve::AuctionCurve(CurveKind kind, std::vector<CurvePoint> points) : kind_(kind), points_(std::move(points)) {
  if (points_.size() < 2) throw std::invalid_argument("auction curve needs at least two points");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const auto& a = points_[i - 1];
    const auto& b = points_[i];
    if (b.volume < a.volume) throw std::invalid_argument("auction curve volumes must be non-decreasing");
    if (kind_ == CurveKind::Supply && b.price < a.price) {
      throw std::invalid_argument("supply curve prices must be non-decreasing");
    }
    if (kind_ == CurveKind::Demand && b.price > a.price) {
      throw std::invalid_argument("demand curve prices must be non-increasing");
    }
  }
}

std::pair<double, double> AuctionCurve::volume_range_at(double price) const {
  const auto& lo_pt = kind_ == CurveKind::Supply ? points_.front() : points_.back();
  const auto& hi_pt = kind_ == CurveKind::Supply ? points_.back() : points_.front();
  if (price < lo_pt.price) return {lo_pt.volume, lo_pt.volume};
  if (price > hi_pt.price) return {hi_pt.volume, hi_pt.volume};
  double lo = INFINITY, hi = -INFINITY;
  auto touch = [&](double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].price == price) touch(points_[i].volume);
    if (i + 1 < points_.size()) {
      const auto& a = points_[i];
      const auto& b = points_[i + 1];
      if ((a.price < price && price < b.price) || (b.price < price && price < a.price)) {
        touch(a.volume + (b.volume - a.volume) * (price - a.price) / (b.price - a.price));
      }
    }
  }
  return {lo, hi};
}

ClearingPoint clearing(const AuctionCurve& supply, const AuctionCurve& demand) {
  const auto& s = supply.points();
  const auto& d = demand.points();
  std::vector<CurvePoint> hits;
  constexpr double eps = 1e-12;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double s_vlo = s[i].volume, s_vhi = s[i + 1].volume;
    const double s_plo = s[i].price, s_phi = s[i + 1].price;
    for (std::size_t j = 0; j + 1 < d.size(); ++j) {
      // Bounding-box rejection; demand prices run downwards.
      if (d[j + 1].volume < s_vlo || d[j].volume > s_vhi) continue;
      if (d[j].price < s_plo || d[j + 1].price > s_phi) continue;
      intersect_segments(s[i], s[i + 1], d[j], d[j + 1], eps, hits);
    }
  }
  if (hits.empty()) throw NoClearing();
  auto by_position = [](const CurvePoint& a, const CurvePoint& b) {
    return a.volume < b.volume || (a.volume == b.volume && a.price < b.price);
  };
  auto [first, last] = std::minmax_element(hits.begin(), hits.end(), by_position);
  return {0.5 * (first->price + last->price), 0.5 * (first->volume + last->volume)};
}

TransformedSupply::TransformedSupply(std::vector<CurvePoint> points, double reference_demand_volume)
    : points_(std::move(points)), reference_volume_(reference_demand_volume) {
  if (points_.empty()) throw std::invalid_argument("transformed supply curve is empty");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i].volume < points_[i - 1].volume || points_[i].price < points_[i - 1].price) {
      throw std::invalid_argument("transformed supply must be non-decreasing");
    }
  }
}

double TransformedSupply::price_at(double volume) const {
  if (volume <= points_.front().volume) {
    // Right-continuous: take the top of a vertical segment at the left edge.
    std::size_t i = 0;
    while (i + 1 < points_.size() && points_[i + 1].volume == points_.front().volume) ++i;
    return volume < points_.front().volume ? points_.front().price : points_[i].price;
  }
  if (volume >= points_.back().volume) return points_.back().price;
  auto it = std::upper_bound(points_.begin(), points_.end(), volume,
                             [](double v, const CurvePoint& p) { return v < p.volume; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  return a.price + (b.price - a.price) * (volume - a.volume) / (b.volume - a.volume);
}

double TransformedSupply::volume_at(double price) const {
  if (price <= points_.front().price) return points_.front().volume;
  if (price >= points_.back().price) {
    // First point reaching the top price.
    for (const auto& p : points_) {
      if (p.price >= price) return p.volume;
    }
    return points_.back().volume;
  }
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const auto& a = points_[i];
    const auto& b = points_[i + 1];
    if (price <= b.price) {
      if (b.price == a.price) return a.volume;
      return a.volume + (b.volume - a.volume) * (price - a.price) / (b.price - a.price);
    }
  }
  return points_.back().volume;
}

TransformedSupply transform(const AuctionCurve& supply, const AuctionCurve& demand) {
  const double v_star = clearing(supply, demand).volume;
  auto price_bounds = [](const AuctionCurve& c) {
    auto [lo, hi] = std::minmax_element(c.points().begin(), c.points().end(),
                                        [](const CurvePoint& a, const CurvePoint& b) { return a.price < b.price; });
    return std::pair{lo->price, hi->price};
  };
  auto [s_lo, s_hi] = price_bounds(supply);
  auto [d_lo, d_hi] = price_bounds(demand);
  const double p_lo = std::max(s_lo, d_lo);
  const double p_hi = std::min(s_hi, d_hi);

  std::vector<double> levels;
  for (const auto* c : {&supply, &demand}) {
    for (const auto& p : c->points()) {
      if (p.price >= p_lo && p.price <= p_hi) levels.push_back(p.price);
    }
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  std::vector<CurvePoint> out;
  out.reserve(2 * levels.size());
  for (double p : levels) {
    auto [sv_lo, sv_hi] = supply.volume_range_at(p);
    auto [dv_lo, dv_hi] = demand.volume_range_at(p);
    double lo = sv_lo + v_star - dv_hi;
    double hi = sv_hi + v_star - dv_lo;
    if (!out.empty()) lo = std::max(lo, out.back().volume);
    out.push_back({lo, p});
    if (hi > lo) out.push_back({hi, p});
  }
  return TransformedSupply(std::move(out), v_star);
}

double slope_at(const TransformedSupply& curve, double volume, double delta) {
  const double vmin = curve.min_volume();
  const double vmax = curve.max_volume();
  if (!(vmax > vmin)) throw std::invalid_argument("degenerate merit-order curve: single volume");
  if (!(delta > 0.0)) throw std::invalid_argument("finite difference must be positive");
  double lo = volume - 0.5 * delta;
  double hi = volume + 0.5 * delta;
  if (hi - lo >= vmax - vmin) {
    lo = vmin;
    hi = vmax;
  } else if (lo < vmin) {
    lo = vmin;
    hi = vmin + delta;
  } else if (hi > vmax) {
    hi = vmax;
    lo = vmax - delta;
  }
  return (curve.price_at(hi) - curve.price_at(lo)) / (hi - lo);
}

void CurveBook::add(const ProductKey& key, AuctionCurve supply, AuctionCurve demand) {
  if (supply.kind() != CurveKind::Supply || demand.kind() != CurveKind::Demand) {
    throw std::invalid_argument("curve kinds do not match supply/demand");
  }
  auto clear = clearing(supply, demand);
  auto transformed = transform(supply, demand);
  entries_.insert_or_assign(key, Entry{std::move(supply), std::move(demand), std::move(transformed), clear});
}

const CurveBook::Entry* CurveBook::find(const ProductKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

CurveBook CurveBook::read(std::istream& in) {
  std::string line;
  if (!csv::next_line(in, line)) throw std::runtime_error("auction curve file is empty");
  csv::Header header(csv::split(line));
  const auto c_kind = header.require("kind");
  const auto c_vol = header.require("volume");
  const auto c_price = header.require("price");
  const auto c_date = header.find("date");
  const auto c_hour = header.find("hour");

  std::map<ProductKey, std::pair<std::vector<CurvePoint>, std::vector<CurvePoint>>> raw;
  while (csv::next_line(in, line)) {
    auto f = csv::split(line);
    ProductKey key{};
    if (c_date) key.day = parse_date(f.at(*c_date));
    if (c_hour) key.hour = csv::parse_int(f.at(*c_hour));
    CurvePoint p{csv::parse_double(f.at(c_vol)), csv::parse_double(f.at(c_price))};
    auto& slot = raw[key];
    (parse_kind(f.at(c_kind)) == CurveKind::Supply ? slot.first : slot.second).push_back(p);
  }
  CurveBook book;
  for (auto& [key, curves] : raw) {
    book.add(key, AuctionCurve(CurveKind::Supply, std::move(curves.first)),
             AuctionCurve(CurveKind::Demand, std::move(curves.second)));
  }
  return book;
}

CurveBook CurveBook::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open auction curve file " + path.string());
  return read(in);
}

void CurveBook::write(std::ostream& out) const {
  out << "date,hour,kind,volume,price\n";
  for (const auto& [key, e] : entries_) {
    for (const auto* c : {&e.supply, &e.demand}) {
      const char* kind = c->kind() == CurveKind::Supply ? "supply" : "demand";
      for (const auto& p : c->points()) {
        out << format_date(key.day) << ',' << key.hour << ',' << kind << ',' << csv::format_double(p.volume)
            << ',' << csv::format_double(p.price) << '\n';
      }
    }
  }
}

}  // namespace cidcast
