#include "cidcast/study_runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "cidcast/csv.hpp"

namespace cidcast {

namespace fs = std::filesystem;
namespace chr = std::chrono;
using Eigen::Index;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

int to_int(const std::string& v) { return csv::parse_int(v); }

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean: " + v);
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw std::invalid_argument("not an unsigned integer: " + v);
  return out;
}

std::vector<double> to_doubles(const std::string& v) {
  std::vector<double> out;
  for (const auto& f : csv::split(v)) out.push_back(csv::parse_double(trim(f)));
  return out;
}

// "0-23", "6,7,12-14"; empty means no restriction.
std::vector<int> to_hours(const std::string& v) {
  std::set<int> out;
  if (trim(v).empty()) return {};
  for (const auto& raw : csv::split(v)) {
    const auto f = trim(raw);
    const auto dash = f.find('-');
    int a = 0, b = 0;
    if (dash == std::string::npos) {
      a = b = to_int(f);
    } else {
      a = to_int(trim(f.substr(0, dash)));
      b = to_int(trim(f.substr(dash + 1)));
    }
    if (a < 0 || b > 23 || a > b) throw std::invalid_argument("bad hour range: " + f);
    for (int h = a; h <= b; ++h) out.insert(h);
  }
  return {out.begin(), out.end()};
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + csv::format_double(xs[i]);
  return out;
}

std::string join(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::string fmt(double v) { return csv::format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Binding {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <class T>
Binding number(std::string key, T& field) {
  if constexpr (std::is_same_v<T, double>) {
    return {std::move(key), [&field](const std::string& v) { field = csv::parse_double(v); },
            [&field] { return fmt(field); }};
  } else if constexpr (std::is_same_v<T, bool>) {
    return {std::move(key), [&field](const std::string& v) { field = to_bool(v); }, [&field] { return fmt(field); }};
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    return {std::move(key), [&field](const std::string& v) { field = to_u64(v); },
            [&field] { return std::to_string(field); }};
  } else {
    return {std::move(key), [&field](const std::string& v) { field = static_cast<T>(to_int(v)); },
            [&field] { return std::to_string(field); }};
  }
}

std::vector<Binding> bindings(StudyConfig& c) {
  std::vector<Binding> b;
  b.push_back({"data_dir", [&c](const std::string& v) { c.data_dir = v; }, [&c] { return c.data_dir.string(); }});
  b.push_back({"study_dir", [&c](const std::string& v) { c.study_dir = v; }, [&c] { return c.study_dir.string(); }});
  b.push_back({"scenario",
               [&c](const std::string& v) {
                 if (v.size() != 1 || v[0] < 'a' || v[0] > 'f') throw std::invalid_argument("scenario must be a..f");
                 c.scenario = v[0];
               },
               [&c] { return std::string(1, c.scenario); }});
  b.push_back({"selector",
               [&c](const std::string& v) {
                 if (v.empty() || v == "scenario") {
                   c.selector.reset();
                 } else {
                   c.selector = parse_selector(v);
                 }
               },
               [&c] { return c.selector ? std::string(selector_name(*c.selector)) : std::string("scenario"); }});
  b.push_back({"test_start", [&c](const std::string& v) { c.test_start = parse_date(v); },
               [&c] { return format_date(c.test_start); }});
  b.push_back(number("test_days", c.test_days));
  b.push_back(number("history_days", c.history_days));
  b.push_back(number("lag", c.lag_hours));
  b.push_back({"hours", [&c](const std::string& v) { c.hours = to_hours(v); }, [&c] { return join(c.hours); }});
  b.push_back(number("seed", c.seed));
  b.push_back(number("workers", c.workers));
  b.push_back(number("audit_fraction", c.audit_fraction));
  b.push_back(number("live_grid", c.live_grid));
  b.push_back(number("p0", c.p0));

  b.push_back({"features.eta_anchor",
               [&c](const std::string& v) {
                 if (v == "idfull") {
                   c.features.eta_anchor = EtaAnchor::LiveIdFull;
                 } else if (v == "id1") {
                   c.features.eta_anchor = EtaAnchor::LiveId1;
                 } else {
                   throw std::invalid_argument("eta_anchor must be idfull or id1");
                 }
               },
               [&c] { return std::string(c.features.eta_anchor == EtaAnchor::LiveIdFull ? "idfull" : "id1"); }});
  b.push_back({"features.slope_deltas", [&c](const std::string& v) { c.features.slope_deltas = to_doubles(v); },
               [&c] { return join(c.features.slope_deltas); }});
  b.push_back(number("features.min_history", c.features.min_history));
  b.push_back(number("cleaning.max_missing_fraction", c.cleaning.max_missing_fraction));
  b.push_back(number("cleaning.zero_variance_tol", c.cleaning.zero_variance_tol));

  b.push_back(number("omp.n_feat", c.omp.n_feat));
  b.push_back(number("omp.tol", c.omp.tol));
  b.push_back(number("omp.max_condition", c.omp.max_condition));
  b.push_back(number("lasso.folds", c.lasso.folds));
  b.push_back(number("lasso.n_lambda", c.lasso.n_lambda));
  b.push_back(number("lasso.lambda_ratio", c.lasso.lambda_ratio));
  b.push_back(number("lasso.shuffle", c.lasso.shuffle));
  b.push_back(number("lasso.tol", c.lasso.tol));
  b.push_back(number("lasso.max_sweeps", c.lasso.max_sweeps));

  b.push_back(number("prior.beta", c.prior.beta));
  b.push_back(number("prior.spread_is_variance", c.prior.spread_is_variance));
  b.push_back(number("prior.sigma_floor", c.prior.sigma_floor));
  b.push_back(number("prior.jitter", c.prior.jitter));

  b.push_back(number("nuts.samples", c.sampler.samples));
  b.push_back(number("nuts.burn_in", c.sampler.burn_in));
  b.push_back(number("nuts.init_step", c.sampler.init_step));
  b.push_back(number("nuts.target_accept", c.sampler.target_accept));
  b.push_back(number("nuts.max_depth", c.sampler.max_depth));
  b.push_back(number("nuts.delta_max", c.sampler.delta_max));

  b.push_back(number("pi.levels", c.summary.pi.levels));
  b.push_back(number("pi.fallback_alpha", c.summary.pi.fallback_alpha));
  b.push_back(number("pi.tie_tol", c.summary.pi.tie_tol));
  b.push_back(number("pi.grid_points", c.summary.grid_points));
  b.push_back({"pi.alpha_grid", [&c](const std::string& v) { c.summary.alpha_grid = to_doubles(v); },
               [&c] { return join(c.summary.alpha_grid); }});

  auto& s = c.synth;
  b.push_back(number("synth.seed", s.seed));
  b.push_back({"synth.start", [&s](const std::string& v) { s.start = parse_date(v); },
               [&s] { return format_date(s.start); }});
  b.push_back(number("synth.days", s.days));
  b.push_back(number("synth.level", s.level));
  b.push_back(number("synth.daily_amplitude", s.daily_amplitude));
  b.push_back(number("synth.weekly_amplitude", s.weekly_amplitude));
  b.push_back(number("synth.ar", s.ar));
  b.push_back(number("synth.ar_sigma", s.ar_sigma));
  b.push_back(number("synth.jump_rate", s.jump_rate));
  b.push_back(number("synth.jump_size", s.jump_size));
  b.push_back(number("synth.w_residual_load", s.w_residual_load));
  b.push_back(number("synth.consumption", s.consumption));
  b.push_back(number("synth.consumption_amplitude", s.consumption_amplitude));
  b.push_back(number("synth.solar_peak", s.solar_peak));
  b.push_back(number("synth.wind_onshore", s.wind_onshore));
  b.push_back(number("synth.wind_offshore", s.wind_offshore));
  b.push_back(number("synth.intraday_error", s.intraday_error));
  b.push_back(number("synth.trades_per_product", s.trades_per_product));
  b.push_back(number("synth.ramp_hours", s.ramp_hours));
  b.push_back(number("synth.flat_share", s.flat_share));
  b.push_back(number("synth.volume_mean", s.volume_mean));
  b.push_back(number("synth.random_walk_sigma", s.random_walk_sigma));
  b.push_back(number("synth.microstructure_sigma", s.microstructure_sigma));
  b.push_back(number("synth.w_shift", s.w_shift));
  b.push_back(number("synth.w_delta_consumption", s.w_delta_consumption));
  b.push_back(number("synth.w_driver", s.w_driver));
  b.push_back(number("synth.driver_ar", s.driver_ar));
  b.push_back(number("synth.decoys", s.decoys));
  b.push_back(number("synth.decoy_correlation", s.decoy_correlation));
  b.push_back(number("synth.self_trade_share", s.self_trade_share));
  b.push_back(number("synth.unknown_flag_share", s.unknown_flag_share));
  b.push_back(number("synth.duplicate_share", s.duplicate_share));
  b.push_back(number("synth.block_share", s.block_share));
  return b;
}

void validate(const StudyConfig& c) {
  if (c.test_days < 1) throw std::invalid_argument("test_days must be positive");
  if (c.history_days < c.features.min_history) throw std::invalid_argument("history_days below features.min_history");
  if (c.lag_hours < 1) throw std::invalid_argument("lag must be at least 1 hour");
  if (c.workers < 1) throw std::invalid_argument("workers must be positive");
  if (!(c.audit_fraction >= 0.0 && c.audit_fraction <= 1.0)) throw std::invalid_argument("audit_fraction outside [0, 1]");
  if (!(c.p0 >= 0.5 && c.p0 <= 1.0)) throw std::invalid_argument("p0 outside [0.5, 1]");
  if (c.sampler.samples < 1 || c.sampler.burn_in < 0) throw std::invalid_argument("bad sampler sizes");
  if (c.omp.n_feat < 1) throw std::invalid_argument("omp.n_feat must be positive");
  if (c.lasso.folds < 2) throw std::invalid_argument("lasso.folds must be at least 2");
}

std::uint64_t day_number(Date d) { return static_cast<std::uint64_t>(d.time_since_epoch().count()); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

// NaN and infinities do not survive JSON; they become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

fs::path forecast_path(const fs::path& study_dir, const ProductKey& key) {
  return study_dir / "forecasts" / (format_product(key) + ".json");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

bool audited(const StudyConfig& config, const ProductKey& key) {
  if (config.audit_fraction <= 0.0) return false;
  const std::uint64_t h = derive_seed(config.seed, {day_number(key.day), static_cast<std::uint64_t>(key.hour), 0xA0D17});
  return static_cast<double>(h >> 11) * 0x1.0p-53 < config.audit_fraction;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string accuracy_cells(const SignAccuracy& s) {
  return fmt(s.spread) + "," + fmt(s.rest) + "," + fmt(s.live_spread) + "," + std::to_string(s.n_spread) + "," +
         std::to_string(s.n_rest) + "," + std::to_string(s.n_live);
}

}  // namespace

Selector parse_selector(std::string_view s) {
  if (s == "omp" || s == "OMP") return Selector::Omp;
  if (s == "lasso" || s == "LASSO") return Selector::Lasso;
  throw std::invalid_argument("unknown selector: " + std::string(s));
}

std::string_view selector_name(Selector s) { return s == Selector::Omp ? "omp" : "lasso"; }

void StudyConfig::set(const std::string& key, const std::string& value) {
  for (auto& b : bindings(*this)) {
    if (b.key != key) continue;
    try {
      b.set(value);
    } catch (const std::exception& e) {
      throw std::invalid_argument(key + ": " + e.what());
    }
    return;
  }
  throw std::invalid_argument("unknown config key: " + key);
}

void StudyConfig::read(std::istream& in) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key = value");
    }
    set(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
  }
  validate(*this);
}

void StudyConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  read(in);
}

void StudyConfig::apply_environment() {
  if (const char* v = std::getenv("CIDCAST_DATA_DIR"); v && *v) data_dir = v;
  if (const char* v = std::getenv("CIDCAST_STUDY_DIR"); v && *v) study_dir = v;
}

std::string StudyConfig::dump() const {
  StudyConfig copy = *this;
  std::string out;
  for (const auto& b : bindings(copy)) out += b.key + " = " + b.get() + "\n";
  return out;
}

ScenarioSpec scenario(char name, int lag_hours) {
  ScenarioSpec s;
  s.name = name;
  s.lag_hours = lag_hours;
  switch (name) {
    case 'a':
      s.kind = ScenarioKind::FixedTau;
      s.tau_hour = 23;
      s.tau_day_offset = -1;
      break;
    case 'b':
    case 'c':
    case 'd':
      s.kind = ScenarioKind::FixedTau;
      s.tau_hour = 5 + 6 * (name - 'b');
      break;
    case 'e':
      s.kind = ScenarioKind::FixedLag;
      break;
    case 'f':
      s.kind = ScenarioKind::FixedLag;
      s.selector = Selector::Lasso;
      break;
    default:
      throw std::invalid_argument(std::string("unknown scenario: ") + name);
  }
  if (s.kind == ScenarioKind::FixedLag && lag_hours < 1) throw std::invalid_argument("lag must be at least 1 hour");
  return s;
}

ScenarioSpec scenario(const StudyConfig& config) {
  auto s = scenario(config.scenario, config.lag_hours);
  if (config.selector) s.selector = *config.selector;
  return s;
}

Timestamp creation_time(const ScenarioSpec& spec, const ProductKey& key) {
  if (spec.kind == ScenarioKind::FixedTau) {
    return local_to_utc(at_local(key.day + chr::days{spec.tau_day_offset}, chr::hours{spec.tau_hour}));
  }
  return delivery_period(key).start - chr::hours{spec.lag_hours};
}

std::vector<int> scenario_hours(const ScenarioSpec& spec, Date day, const std::vector<int>& restrict) {
  std::vector<int> out;
  for (int h = 0; h < 24; ++h) {
    const ProductKey key{day, h};
    if (!is_canonical(key)) continue;
    if (!restrict.empty() && std::find(restrict.begin(), restrict.end(), h) == restrict.end()) continue;
    if (creation_time(spec, key) < gate_closure(key)) out.push_back(h);
  }
  return out;
}

MarketData load_market_data(const fs::path& dir) {
  MarketData d;
  const auto report = parse_transactions(dir / "transactions.csv");
  d.trades = TradeBook(report.transactions);
  if (fs::exists(dir / "curves.csv")) d.curves = CurveBook::load(dir / "curves.csv");
  d.covariates = CovariateStore::load(dir / "covariates.csv");
  return d;
}

MarketData from_synthetic(const SynthData& data) {
  MarketData d;
  d.trades = TradeBook(data.transactions);
  d.curves = data.curves;
  d.covariates = data.covariates;
  return d;
}

ForecastOutput forecast_one(const FeatureFactory& factory, const MarketData& data, const StudyConfig& config,
                            const ScenarioSpec& spec, const ProductKey& key) {
  const Timestamp tau = creation_time(spec, key);
  const auto design = factory.build_design(key, tau, config.history_days);
  if (!design.y_true) throw NoRealisedPrice("no realised IDFull for " + format_product(key));
  const auto p_da = data.covariates.get("P_da", key, tau);
  if (!p_da) throw std::runtime_error("P_da not available at the creation time");

  ForecastOutput out;
  out.tau = tau;
  const auto first = clean_and_standardise(design, config.cleaning);
  out.candidate_features = first.columns.size();

  SelectionResult sel;
  if (spec.selector == Selector::Omp) {
    sel = omp_select(first.X, first.y, config.omp);
  } else {
    auto opts = config.lasso;
    opts.seed = derive_seed(config.seed, {day_number(key.day), static_cast<std::uint64_t>(key.hour), 1});
    sel = lasso_select(first.X, first.y, opts);
  }
  std::vector<Index> chosen;
  for (Index j : sel.selected) chosen.push_back(first.columns[static_cast<std::size_t>(j)]);
  std::sort(chosen.begin(), chosen.end());

  const auto clean = clean_and_standardise(design, config.cleaning, &chosen);
  out.training_rows = clean.rows.size();
  out.selected = clean.names;

  const Prior prior = empirical_prior(clean.X, clean.y, config.prior, &out.warnings);
  const ModelSpec model = make_model(clean.X, clean.y, prior);
  const auto samples = sample_posterior(model, config.sampler,
                                        derive_seed(config.seed, {day_number(key.day), static_cast<std::uint64_t>(key.hour)}));
  out.step_size = samples.diagnostics.step_size;
  out.divergences = samples.diagnostics.divergences;
  for (const auto& w : samples.diagnostics.warnings) out.warnings.push_back(w);

  const auto ppd = estimate_ppd(samples, clean.x_new).destandardised(clean.y_mean, clean.y_std);
  const auto live = live_stats(data.trades.trades(key), key, tau).idfull;
  const auto summary = summarise(ppd, p_da, live, config.summary);

  auto& r = out.record;
  r.scenario = std::string(1, spec.name);
  r.key = key;
  r.y_hat = summary.y_hat;
  r.lower = summary.interval.lower;
  r.upper = summary.interval.upper;
  r.alpha = summary.interval.alpha;
  r.p_da = *p_da;
  r.y_true = *design.y_true;
  r.live_idfull = live;
  r.p_plus_spread = summary.spread->plus;
  if (summary.rest) r.p_plus_rest = summary.rest->plus;
  r.crps = crps(ppd, r.y_true);
  r.alpha_grid = summary.alpha_grid;
  r.hdi_family = summary.hdi_family;
  out.p_cut = summary.interval.p_cut;
  out.fallback = summary.interval.fallback;
  out.fusion_events = summary.interval.fusion_events;
  return out;
}

std::string to_json(const ForecastOutput& out) {
  const auto& r = out.record;
  json family = json::array();
  for (const auto& set : r.hdi_family) {
    json intervals = json::array();
    for (const auto& iv : set.intervals) intervals.push_back({num(iv.lower), num(iv.upper), num(iv.mass)});
    family.push_back({{"p_cut", num(set.p_cut)}, {"alpha", num(set.alpha)}, {"intervals", intervals}});
  }
  json j;
  j["scenario"] = r.scenario;
  j["product"] = format_product(r.key);
  j["day"] = format_date(r.key.day);
  j["hour"] = r.key.hour;
  j["tau"] = format_timestamp(out.tau);
  j["y_hat"] = num(r.y_hat);
  j["interval"] = {{"lower", num(r.lower)},     {"upper", num(r.upper)},          {"alpha", num(r.alpha)},
                   {"p_cut", num(out.p_cut)},   {"fallback", out.fallback},       {"fusion_events", out.fusion_events}};
  j["p_da"] = num(r.p_da);
  j["y_true"] = num(r.y_true);
  j["live_idfull"] = optional_json(r.live_idfull);
  j["p_plus_spread"] = num(r.p_plus_spread);
  j["p_plus_rest"] = optional_json(r.p_plus_rest);
  j["crps"] = num(r.crps);
  j["alpha_grid"] = r.alpha_grid;
  j["hdi_family"] = family;
  j["selected"] = out.selected;
  j["training_rows"] = out.training_rows;
  j["candidate_features"] = out.candidate_features;
  j["nuts"] = {{"step_size", num(out.step_size)}, {"divergences", out.divergences}};
  j["warnings"] = out.warnings;
  return j.dump(1) + "\n";
}

ForecastOutput forecast_from_json(const std::string& text) {
  const json j = json::parse(text);
  ForecastOutput out;
  auto& r = out.record;
  r.scenario = j.at("scenario").get<std::string>();
  r.key = {parse_date(j.at("day").get<std::string>()), j.at("hour").get<int>()};
  out.tau = parse_timestamp(j.at("tau").get<std::string>());
  r.y_hat = num_from(j.at("y_hat"));
  const auto& iv = j.at("interval");
  r.lower = num_from(iv.at("lower"));
  r.upper = num_from(iv.at("upper"));
  r.alpha = num_from(iv.at("alpha"));
  out.p_cut = num_from(iv.at("p_cut"));
  out.fallback = iv.at("fallback").get<bool>();
  out.fusion_events = iv.at("fusion_events").get<int>();
  r.p_da = num_from(j.at("p_da"));
  r.y_true = num_from(j.at("y_true"));
  r.live_idfull = optional_from(j.at("live_idfull"));
  r.p_plus_spread = num_from(j.at("p_plus_spread"));
  r.p_plus_rest = optional_from(j.at("p_plus_rest"));
  r.crps = num_from(j.at("crps"));
  r.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
  for (const auto& s : j.at("hdi_family")) {
    HdiSet set;
    set.p_cut = num_from(s.at("p_cut"));
    set.alpha = num_from(s.at("alpha"));
    for (const auto& t : s.at("intervals")) set.intervals.push_back({num_from(t.at(0)), num_from(t.at(1)), num_from(t.at(2))});
    r.hdi_family.push_back(std::move(set));
  }
  out.selected = j.at("selected").get<std::vector<std::string>>();
  out.training_rows = j.at("training_rows").get<std::size_t>();
  out.candidate_features = j.at("candidate_features").get<std::size_t>();
  out.step_size = num_from(j.at("nuts").at("step_size"));
  out.divergences = j.at("nuts").at("divergences").get<int>();
  out.warnings = j.at("warnings").get<std::vector<std::string>>();
  return out;
}

std::vector<std::string> audit_forecast(const MarketData& data, const StudyConfig& config, const ScenarioSpec& spec,
                                        const ProductKey& key) {
  const Timestamp tau = creation_time(spec, key);
  const FeatureFactory full(data.trades, data.curves, data.covariates, config.features);
  const auto a = full.build_design(key, tau, config.history_days);
  const TradeBook trades = data.trades.truncated(tau);
  const CovariateStore cov = data.covariates.truncated(tau);
  const FeatureFactory cut(trades, data.curves, cov, config.features);
  const auto b = cut.build_design(key, tau, config.history_days);

  std::vector<std::string> bad;
  for (Index j = 0; j < a.X.cols(); ++j) {
    for (Index i = 0; i < a.X.rows(); ++i) {
      if (!same(a.X(i, j), b.X(i, j))) {
        bad.push_back(a.names[static_cast<std::size_t>(j)]);
        break;
      }
    }
  }
  for (Index i = 0; i < a.training_rows(); ++i) {
    if (!same(a.y(i), b.y(i))) {
      bad.emplace_back("target");
      break;
    }
  }
  return bad;
}

RunSummary run_study(const MarketData& data, const StudyConfig& config, const ScenarioSpec& spec, std::ostream* log) {
  validate(config);
  fs::create_directories(config.study_dir / "forecasts");
  {
    auto out = open_out(config.study_dir / "config.txt");
    out << config.dump();
  }

  std::vector<ProductKey> jobs;
  for (int k = 0; k < config.test_days; ++k) {
    const Date day = config.test_start + chr::days{k};
    for (int h : scenario_hours(spec, day, config.hours)) jobs.push_back({day, h});
  }

  const FeatureFactory factory(data.trades, data.curves, data.covariates, config.features);
  RunSummary summary;
  summary.planned = jobs.size();
  std::mutex mutex;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const auto& key = jobs[i];
      const fs::path path = forecast_path(config.study_dir, key);
      if (fs::exists(path)) {
        try {
          (void)forecast_from_json(read_file(path));
          std::lock_guard lock(mutex);
          ++summary.reused;
          continue;
        } catch (const std::exception&) {
          // unreadable leftovers are recomputed
        }
      }
      std::string error;
      bool skipped = false;
      std::vector<std::string> leaks;
      bool audit = false;
      try {
        const auto out = forecast_one(factory, data, config, spec, key);
        write_file(path, to_json(out));
        if (audited(config, key)) {
          audit = true;
          leaks = audit_forecast(data, config, spec, key);
        }
      } catch (const NoRealisedPrice& e) {
        skipped = true;
        error = e.what();
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard lock(mutex);
      if (skipped) {
        ++summary.skipped;
        if (log) *log << "skip " << format_product(key) << ": " << error << "\n";
      } else if (!error.empty()) {
        ++summary.failed;
        summary.errors.push_back(format_product(key) + ": " + error);
        if (log) *log << "fail " << format_product(key) << ": " << error << "\n";
      } else {
        ++summary.computed;
        if (log) *log << "done " << format_product(key) << "\n";
      }
      if (audit) {
        ++summary.audited;
        if (!leaks.empty()) {
          ++summary.audit_failures;
          std::string names;
          for (const auto& n : leaks) names += " " + n;
          summary.errors.push_back(format_product(key) + ": leakage in" + names);
          if (log) *log << "leak " << format_product(key) << ":" << names << "\n";
        }
      }
    }
  };

  const int n_threads = std::min<int>(config.workers, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::sort(summary.errors.begin(), summary.errors.end());
  if (!summary.errors.empty()) {
    auto out = open_out(config.study_dir / "errors.log");
    for (const auto& e : summary.errors) out << e << "\n";
  } else {
    fs::remove(config.study_dir / "errors.log");
  }

  std::vector<ForecastOutput> forecasts;
  std::set<ProductKey> planned(jobs.begin(), jobs.end());
  for (auto& f : load_forecasts(config.study_dir)) {
    if (planned.count(f.record.key)) forecasts.push_back(std::move(f));
  }
  {
    auto out = open_out(config.study_dir / "results.csv");
    write_results_csv(out, forecasts);
  }
  write_scores(config.study_dir, forecasts, config.p0);
  return summary;
}

std::vector<ForecastOutput> load_forecasts(const fs::path& study_dir) {
  std::vector<ForecastOutput> out;
  const fs::path dir = study_dir / "forecasts";
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    try {
      out.push_back(forecast_from_json(read_file(entry.path())));
    } catch (const std::exception& e) {
      throw std::runtime_error("bad forecast file " + entry.path().string() + ": " + e.what());
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ForecastOutput& a, const ForecastOutput& b) { return a.record.key < b.record.key; });
  return out;
}

void write_results_csv(std::ostream& out, const std::vector<ForecastOutput>& forecasts) {
  out << "day,hour,scenario,tau,y_hat,lower,upper,alpha,p_cut,fallback,fusion_events,p_da,live_idfull,y_true,"
         "p_plus_spread,p_plus_rest,crps,n_selected,training_rows,candidate_features,step_size,divergences,selected\n";
  for (const auto& f : forecasts) {
    const auto& r = f.record;
    std::string names;
    for (std::size_t i = 0; i < f.selected.size(); ++i) names += (i ? ";" : "") + f.selected[i];
    out << format_date(r.key.day) << ',' << r.key.hour << ',' << r.scenario << ',' << format_timestamp(f.tau) << ','
        << fmt(r.y_hat) << ',' << fmt(r.lower) << ',' << fmt(r.upper) << ',' << fmt(r.alpha) << ',' << fmt(f.p_cut)
        << ',' << (f.fallback ? 1 : 0) << ',' << f.fusion_events << ',' << fmt(r.p_da) << ','
        << csv::format_optional(r.live_idfull) << ',' << fmt(r.y_true) << ',' << fmt(r.p_plus_spread) << ','
        << csv::format_optional(r.p_plus_rest) << ',' << fmt(r.crps) << ',' << f.selected.size() << ','
        << f.training_rows << ',' << f.candidate_features << ',' << fmt(f.step_size) << ',' << f.divergences << ",\""
        << names << "\"\n";
  }
}

ScoreTable write_scores(const fs::path& study_dir, const std::vector<ForecastOutput>& forecasts, double p0) {
  std::vector<ForecastRecord> records;
  records.reserve(forecasts.size());
  for (const auto& f : forecasts) records.push_back(f.record);
  const ScoreTable table = score(records, p0);
  const std::string head = "n,mae,bench_mae,crps,spread_acc,rest_acc,live_spread_acc,n_spread,n_rest,n_live";
  auto row = [](const Aggregate& a) {
    return std::to_string(a.n) + "," + fmt(a.mae) + "," + fmt(a.bench_mae) + "," + fmt(a.crps) + "," +
           accuracy_cells(a.signs);
  };
  {
    auto out = open_out(study_dir / "scores_overall.csv");
    out << head << ",ace,ace_signed\n" << row(table.overall) << ',' << fmt(table.ace) << ',' << fmt(table.ace_signed)
        << "\n";
  }
  {
    auto out = open_out(study_dir / "scores_by_hour.csv");
    out << "hour," << head << "\n";
    for (const auto& [h, a] : table.by_hour) out << h << ',' << row(a) << "\n";
  }
  {
    auto out = open_out(study_dir / "coverage.csv");
    out << "alpha,coverage,n\n";
    for (std::size_t k = 0; k < table.coverage.alpha.size(); ++k) {
      out << fmt(table.coverage.alpha[k]) << ',' << fmt(table.coverage.coverage[k]) << ',' << table.coverage.n << "\n";
    }
  }
  {
    auto out = open_out(study_dir / "record_scores.csv");
    out << "day,hour,abs_error,bench_abs_error,spread_miss,rest_miss,live_spread_miss,crps\n";
    for (const auto& r : records) {
      const auto s = record_scores(r, p0);
      out << format_date(r.key.day) << ',' << r.key.hour << ',' << fmt(s.abs_error) << ',' << fmt(s.bench_abs_error)
          << ',' << fmt(s.spread_miss) << ',' << fmt(s.rest_miss) << ',' << fmt(s.live_spread_miss) << ','
          << fmt(s.crps) << "\n";
    }
  }
  return table;
}

std::vector<DmCell> compare_studies(const std::vector<ForecastOutput>& a, const std::vector<ForecastOutput>& b,
                                    double p0, int horizon) {
  std::map<ProductKey, const ForecastRecord*> ma, mb;
  for (const auto& f : a) ma[f.record.key] = &f.record;
  for (const auto& f : b) mb[f.record.key] = &f.record;
  std::vector<std::string> only;
  for (const auto& [k, r] : ma) {
    if (!mb.count(k)) only.push_back(format_product(k) + " (first only)");
  }
  for (const auto& [k, r] : mb) {
    if (!ma.count(k)) only.push_back(format_product(k) + " (second only)");
  }
  if (!only.empty()) {
    std::string msg = "compare: forecast keys differ in " + std::to_string(only.size()) + " products:";
    for (std::size_t i = 0; i < std::min<std::size_t>(only.size(), 5); ++i) msg += " " + only[i];
    throw std::invalid_argument(msg);
  }

  std::vector<RecordScores> sa, sb;
  for (const auto& [k, r] : ma) {
    sa.push_back(record_scores(*r, p0));
    sb.push_back(record_scores(*mb.at(k), p0));
  }

  using Pick = std::function<double(std::size_t)>;
  auto cell = [&](const std::string& pair, const std::string& score, const Pick& first, const Pick& second) {
    DmCell c;
    c.pair = pair;
    c.score = score;
    std::vector<double> la, lb;
    for (std::size_t i = 0; i < sa.size(); ++i) {
      const double x = first(i), y = second(i);
      if (std::isnan(x) || std::isnan(y)) continue;
      la.push_back(x);
      lb.push_back(y);
    }
    if (la.empty()) {
      c.mean_first = c.mean_second = kNaN;
      c.note = "no data";
      return c;
    }
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < la.size(); ++i) {
      s1 += la[i];
      s2 += lb[i];
    }
    c.mean_first = s1 / static_cast<double>(la.size());
    c.mean_second = s2 / static_cast<double>(la.size());
    try {
      c.result = dm_test(lb, la, horizon, true);
    } catch (const std::domain_error&) {
      c.note = "degenerate";
    } catch (const std::invalid_argument& e) {
      c.note = e.what();
    }
    return c;
  };
  auto na = [](const std::string& pair, const std::string& score) {
    DmCell c;
    c.pair = pair;
    c.score = score;
    c.mean_first = c.mean_second = kNaN;
    c.note = "no live rest forecast";
    return c;
  };

  std::vector<DmCell> out;
  out.push_back(cell("a_vs_b", "mae", [&](auto i) { return sa[i].abs_error; }, [&](auto i) { return sb[i].abs_error; }));
  out.push_back(cell("a_vs_b", "spread_sign", [&](auto i) { return sa[i].spread_miss; },
                     [&](auto i) { return sb[i].spread_miss; }));
  out.push_back(cell("a_vs_b", "rest_sign", [&](auto i) { return sa[i].rest_miss; },
                     [&](auto i) { return sb[i].rest_miss; }));
  out.push_back(cell("a_vs_b", "crps", [&](auto i) { return sa[i].crps; }, [&](auto i) { return sb[i].crps; }));
  for (int side = 0; side < 2; ++side) {
    const auto& s = side == 0 ? sa : sb;
    const std::string pair = side == 0 ? "a_vs_live" : "b_vs_live";
    out.push_back(cell(pair, "mae", [&](auto i) { return s[i].abs_error; }, [&](auto i) { return s[i].bench_abs_error; }));
    out.push_back(cell(pair, "spread_sign", [&](auto i) { return s[i].spread_miss; },
                       [&](auto i) { return s[i].live_spread_miss; }));
    out.push_back(na(pair, "rest_sign"));
    // A point forecast's CRPS is its absolute error.
    out.push_back(cell(pair, "crps", [&](auto i) { return s[i].crps; }, [&](auto i) { return s[i].bench_abs_error; }));
  }
  return out;
}

void write_compare_csv(std::ostream& out, const std::vector<DmCell>& cells) {
  out << "pair,score,mean_first,mean_second,n,statistic,p_value,note\n";
  for (const auto& c : cells) {
    out << c.pair << ',' << c.score << ',' << fmt(c.mean_first) << ',' << fmt(c.mean_second) << ',';
    if (c.result) {
      out << c.result->n << ',' << fmt(c.result->statistic) << ',' << fmt(c.result->p_value);
    } else {
      out << ",NA,NA";
    }
    out << ',' << c.note << "\n";
  }
}

}  // namespace cidcast
