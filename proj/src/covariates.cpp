#include "cidcast/covariates.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "cidcast/csv.hpp"

namespace cidcast {

namespace chr = std::chrono;

Availability parse_availability(std::string_view s) {
  if (s == "static") return Availability::Static;
  if (s == "auction") return Availability::Auction;
  if (s == "day_ahead") return Availability::DayAhead;
  if (s == "intraday") return Availability::Intraday;
  if (s == "daily") return Availability::Daily;
  if (s == "live") return Availability::Live;
  throw std::invalid_argument("unknown availability class '" + std::string(s) + "'");
}

std::string_view availability_name(Availability a) {
  switch (a) {
    case Availability::Static: return "static";
    case Availability::Auction: return "auction";
    case Availability::DayAhead: return "day_ahead";
    case Availability::Intraday: return "intraday";
    case Availability::Daily: return "daily";
    case Availability::Live: return "live";
  }
  return "static";
}

Timestamp available_from(Availability a, const ProductKey& key) {
  switch (a) {
    case Availability::Static: return Timestamp::min();
    case Availability::Auction: return local_to_utc(at_local(key.day - chr::days{1}, chr::hours{13}));
    case Availability::DayAhead: return local_to_utc(at_local(key.day - chr::days{1}, chr::hours{18}));
    case Availability::Intraday: return local_to_utc(at_local(key.day, chr::hours{8}));
    case Availability::Daily: return local_to_utc(at_local(key.day + chr::days{1}, chr::hours{0}));
    case Availability::Live: return gate_closure(key);
  }
  return Timestamp::max();
}

void CovariateStore::add(const std::string& name, const ProductKey& key, double value, Availability cls) {
  auto [it, inserted] = series_.try_emplace(name);
  if (inserted) {
    it->second.cls = cls;
  } else if (it->second.cls != cls) {
    throw std::invalid_argument("series '" + name + "' has conflicting availability classes");
  }
  it->second.values.insert_or_assign(key, value);
}

std::vector<std::string> CovariateStore::names() const {
  std::vector<std::string> out;
  out.reserve(series_.size());
  for (const auto& [name, s] : series_) out.push_back(name);
  return out;
}

std::optional<Availability> CovariateStore::availability(std::string_view name) const {
  auto it = series_.find(name);
  if (it == series_.end()) return std::nullopt;
  return it->second.cls;
}

std::optional<double> CovariateStore::raw(std::string_view name, const ProductKey& key) const {
  auto it = series_.find(name);
  if (it == series_.end()) return std::nullopt;
  auto v = it->second.values.find(key);
  if (v == it->second.values.end()) return std::nullopt;
  return v->second;
}

std::optional<double> CovariateStore::get(std::string_view name, const ProductKey& key, Timestamp tau) const {
  auto it = series_.find(name);
  if (it == series_.end()) return std::nullopt;
  const Series& s = it->second;
  if (s.cls != Availability::Daily) {
    if (available_from(s.cls, key) > tau) return std::nullopt;
    auto v = s.values.find(key);
    if (v == s.values.end()) return std::nullopt;
    return v->second;
  }
  // Daily values are keyed by date only; walk back to the latest known one.
  auto v = s.values.upper_bound(ProductKey{key.day, 23});
  while (v != s.values.begin()) {
    --v;
    if (available_from(Availability::Daily, v->first) <= tau) return v->second;
  }
  return std::nullopt;
}

CovariateStore CovariateStore::truncated(Timestamp cutoff) const {
  CovariateStore out;
  for (const auto& [name, s] : series_) {
    auto& dst = out.series_[name];
    dst.cls = s.cls;
    for (const auto& [key, value] : s.values) {
      if (available_from(s.cls, key) <= cutoff) dst.values.emplace(key, value);
    }
  }
  return out;
}

CovariateStore CovariateStore::read(std::istream& in) {
  std::string line;
  if (!csv::next_line(in, line)) throw std::runtime_error("covariate file is empty");
  csv::Header header(csv::split(line));
  const auto c_name = header.require("series_name");
  const auto c_date = header.require("date");
  const auto c_hour = header.require("hour");
  const auto c_value = header.require("value");
  const auto c_class = header.require("availability_class");
  CovariateStore store;
  while (csv::next_line(in, line)) {
    auto f = csv::split(line);
    if (f.size() < header.names().size()) throw std::runtime_error("short covariate row: " + line);
    if (f[c_value].empty()) continue;
    int hour = csv::parse_int(f[c_hour]);
    if (hour < 0 || hour > 23) throw std::runtime_error("covariate hour out of range: " + line);
    store.add(f[c_name], {parse_date(f[c_date]), hour}, csv::parse_double(f[c_value]),
              parse_availability(f[c_class]));
  }
  return store;
}

CovariateStore CovariateStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open covariate file " + path.string());
  return read(in);
}

void CovariateStore::merge(const CovariateStore& other) {
  for (const auto& [name, s] : other.series_) {
    for (const auto& [key, value] : s.values) add(name, key, value, s.cls);
  }
}

void CovariateStore::write(std::ostream& out) const {
  out << "series_name,date,hour,value,availability_class\n";
  for (const auto& [name, s] : series_) {
    for (const auto& [key, value] : s.values) {
      out << name << ',' << format_date(key.day) << ',' << key.hour << ',' << csv::format_double(value) << ','
          << availability_name(s.cls) << '\n';
    }
  }
}

}  // namespace cidcast
