#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <vector>

#include "cidcast/time.hpp"

namespace cidcast {

struct CurvePoint {
  double volume = 0.0;  // MWh
  double price = 0.0;   // EUR/MWh
};

enum class CurveKind { Supply, Demand };

/// Aggregated day-ahead auction curve as an ordered polyline in
/// (volume, price). Volumes are non-decreasing; supply prices are
/// non-decreasing and demand prices non-increasing along the polyline.
/// Vertical and horizontal segments are allowed.
class AuctionCurve {
 public:
  AuctionCurve(CurveKind kind, std::vector<CurvePoint> points);

  CurveKind kind() const { return kind_; }
  const std::vector<CurvePoint>& points() const { return points_; }

  /// Range of volumes at which the curve sits at `price`; constant
  /// extrapolation outside the price domain.
  std::pair<double, double> volume_range_at(double price) const;

 private:
  CurveKind kind_;
  std::vector<CurvePoint> points_;
};

class NoClearing : public std::runtime_error {
 public:
  NoClearing() : std::runtime_error("no clearing: supply and demand curves do not intersect") {}
};

struct ClearingPoint {
  double price = 0.0;
  double volume = 0.0;
};

/// Intersection of the two polylines. Where they overlap along a segment
/// the midpoint of the overlap is returned. Throws NoClearing.
ClearingPoint clearing(const AuctionCurve& supply, const AuctionCurve& demand);

/// Supply curve after moving all demand elasticity to the supply side:
/// at every price p the volume is S(p) + V* - D(p), V* the clearing volume.
class TransformedSupply {
 public:
  TransformedSupply(std::vector<CurvePoint> points, double reference_demand_volume);

  const std::vector<CurvePoint>& points() const { return points_; }
  double reference_demand_volume() const { return reference_volume_; }
  double min_volume() const { return points_.front().volume; }
  double max_volume() const { return points_.back().volume; }

  /// Linear interpolation, right-continuous at vertical jumps, constant
  /// outside the volume domain.
  double price_at(double volume) const;
  /// Smallest volume at which the curve reaches `price`, clamped to the domain.
  double volume_at(double price) const;

 private:
  std::vector<CurvePoint> points_;
  double reference_volume_;
};

TransformedSupply transform(const AuctionCurve& supply, const AuctionCurve& demand);

/// Central finite-difference slope (EUR/MWh per MWh) over a volume window of
/// width `delta`. Windows crossing the domain edge are shifted inside it
/// (one-sided); a domain narrower than `delta` uses the whole domain.
double slope_at(const TransformedSupply& curve, double volume, double delta);

/// Curves for many products. CSV columns: kind, volume, price, with optional
/// date and hour columns keying the product; rows are in curve order.
class CurveBook {
 public:
  struct Entry {
    AuctionCurve supply;
    AuctionCurve demand;
    TransformedSupply transformed;
    ClearingPoint clear;
  };

  CurveBook() = default;
  void add(const ProductKey& key, AuctionCurve supply, AuctionCurve demand);
  const Entry* find(const ProductKey& key) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  static CurveBook load(const std::filesystem::path& path);
  static CurveBook read(std::istream& in);
  void write(std::ostream& out) const;

 private:
  std::map<ProductKey, Entry> entries_;
};

}  // namespace cidcast
