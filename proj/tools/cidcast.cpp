#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "cidcast/csv.hpp"
#include "cidcast/study_runner.hpp"

using namespace cidcast;
namespace fs = std::filesystem;

namespace {

ProductKey parse_product(const std::string& text) {
  const auto us = text.find('_');
  if (us == std::string::npos) throw std::invalid_argument("product must look like YYYY-MM-DD_HH");
  return {parse_date(text.substr(0, us)), csv::parse_int(text.substr(us + 1))};
}

void print_eod(std::ostream& out, const ProductKey& key, const LiveStats& s) {
  out << format_product(key) << ',' << csv::format_optional(s.id1) << ',' << csv::format_optional(s.id3) << ','
      << csv::format_optional(s.idfull) << ',' << csv::format_optional(s.high) << ',' << csv::format_optional(s.low)
      << ',' << csv::format_optional(s.last) << ',' << csv::format_optional(s.deviat) << ','
      << csv::format_double(s.v_buy) << ',' << csv::format_double(s.v_sell) << "\n";
}

struct Common {
  std::string config;
  std::string data;
  std::string study;
};

StudyConfig make_config(const Common& c) {
  StudyConfig config;
  if (!c.config.empty()) config.load(c.config);
  config.apply_environment();
  if (!c.data.empty()) config.data_dir = c.data;
  if (!c.study.empty()) config.study_dir = c.study;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic forecasts of the continuous intraday IDFull index"};
  app.require_subcommand(1);

  // index
  auto* index = app.add_subcommand("index", "Live or end-of-day index values from a transaction feed");
  std::string index_data, product, day, series_out;
  int grid = 250;
  index->add_option("--data", index_data, "Directory holding transactions.csv, or the CSV itself");
  index->add_option("--product", product, "YYYY-MM-DD_HH: live series on the creation-time grid");
  index->add_option("--day", day, "YYYY-MM-DD: end-of-day statistics of every hour");
  index->add_option("--grid", grid, "Grid points of the live series")->check(CLI::PositiveNumber);
  index->add_option("--out", series_out, "Output file (default stdout)");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic market with known ground truth");
  std::string synth_out = "data", synth_config, synth_start;
  std::uint64_t synth_seed = 0;
  int synth_days = 0;
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--config", synth_config, "key = value file (synth.* keys)");
  synth->add_option("--seed", synth_seed, "Seed (overrides synth.seed)");
  synth->add_option("--days", synth_days, "Number of days (overrides synth.days)");
  synth->add_option("--start", synth_start, "First day YYYY-MM-DD");

  // forecast
  auto* forecast = app.add_subcommand("forecast", "Run a forecasting scenario");
  Common fc;
  std::string scen, selector, hours, start;
  int lag = 0, samples = 0, workers = 0, days = 0, history = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  forecast->add_option("--config", fc.config, "key = value study config");
  forecast->add_option("--data", fc.data, "Data directory (overrides CIDCAST_DATA_DIR)");
  forecast->add_option("--study", fc.study, "Output directory (overrides CIDCAST_STUDY_DIR)");
  forecast->add_option("--scenario", scen, "a..f")->check(CLI::IsMember({"a", "b", "c", "d", "e", "f"}));
  forecast->add_option("--lag", lag, "Hours between creation and delivery start (e, f)")->check(CLI::PositiveNumber);
  forecast->add_option("--selector", selector, "omp or lasso")->check(CLI::IsMember({"omp", "lasso"}));
  forecast->add_option("--samples", samples, "Posterior draws")->check(CLI::PositiveNumber);
  auto* seed_opt = forecast->add_option("--seed", seed, "Seed");
  forecast->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  forecast->add_option("--start", start, "First test day YYYY-MM-DD");
  forecast->add_option("--days", days, "Number of test days")->check(CLI::PositiveNumber);
  forecast->add_option("--history", history, "Training days")->check(CLI::PositiveNumber);
  forecast->add_option("--hours", hours, "Restrict hours, e.g. 0-5,12");
  bool audit = false;
  forecast->add_flag("--audit", audit, "Re-check 1% of forecasts against feeds truncated at the creation time");

  // score
  auto* scorecmd = app.add_subcommand("score", "Recompute score files of a study directory");
  std::string score_dir;
  double p0 = 0.5;
  scorecmd->add_option("study", score_dir, "Study directory")->required();
  scorecmd->add_option("--p0", p0, "Decision threshold of the spread sign");

  // compare
  auto* compare = app.add_subcommand("compare", "Diebold-Mariano matrix of two studies");
  std::string first, second, compare_out;
  int horizon = 1;
  double compare_p0 = 0.5;
  compare->add_option("first", first, "Study directory a")->required();
  compare->add_option("second", second, "Study directory b")->required();
  compare->add_option("--out", compare_out, "Output CSV (default stdout)");
  compare->add_option("--horizon", horizon, "DM horizon")->check(CLI::PositiveNumber);
  compare->add_option("--p0", compare_p0, "Decision threshold of the spread sign");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    if (*index) {
      fs::path src = index_data.empty() ? fs::path(std::getenv("CIDCAST_DATA_DIR") ? std::getenv("CIDCAST_DATA_DIR") : "data")
                                        : fs::path(index_data);
      if (fs::is_directory(src)) src /= "transactions.csv";
      const auto report = parse_transactions(src);
      for (const auto& issue : report.skipped) std::cerr << "skipped line " << issue.line << ": " << issue.message << "\n";
      std::ofstream file;
      if (!series_out.empty()) {
        file.open(series_out);
        if (!file) throw std::runtime_error("cannot write " + series_out);
      }
      std::ostream& out = series_out.empty() ? std::cout : file;
      if (!product.empty()) {
        const auto key = parse_product(product);
        write_live_series(out, build_live_series(filter_eligible(report.transactions, key), key, grid));
      } else if (!day.empty()) {
        const TradeBook book(report.transactions);
        out << "product,id1,id3,idfull,high,low,last,deviat,v_buy,v_sell\n";
        for (int h = 0; h < 24; ++h) {
          const ProductKey key{parse_date(day), h};
          if (is_canonical(key)) print_eod(out, key, eod_stats(book.trades(key), key));
        }
      } else {
        throw std::invalid_argument("index needs --product or --day");
      }
      return 0;
    }

    if (*synth) {
      StudyConfig config;
      if (!synth_config.empty()) config.load(synth_config);
      if (synth->count("--seed")) config.synth.seed = synth_seed;
      if (synth_days > 0) config.synth.days = synth_days;
      if (!synth_start.empty()) config.synth.start = parse_date(synth_start);
      const auto data = generate(config.synth);
      write_synthetic(data, synth_out);
      std::cout << "wrote " << data.transactions.size() << " feed rows for " << data.latent.size() << " products to "
                << synth_out << "\n";
      return 0;
    }

    if (*forecast) {
      StudyConfig config = make_config(fc);
      if (!scen.empty()) config.scenario = scen[0];
      if (lag > 0) config.lag_hours = lag;
      if (!selector.empty()) config.selector = parse_selector(selector);
      if (samples > 0) config.sampler.samples = samples;
      if (seed_set) config.seed = seed;
      if (workers > 0) config.workers = workers;
      if (!start.empty()) config.test_start = parse_date(start);
      if (days > 0) config.test_days = days;
      if (history > 0) config.history_days = history;
      if (!hours.empty()) config.set("hours", hours);
      if (audit && config.audit_fraction == 0.0) config.audit_fraction = 0.01;
      const auto spec = scenario(config);
      const auto data = load_market_data(config.data_dir);
      const auto run = run_study(data, config, spec, &std::cerr);
      std::cout << "planned " << run.planned << ", computed " << run.computed << ", reused " << run.reused
                << ", skipped " << run.skipped << ", failed " << run.failed << ", audited " << run.audited
                << " (leaks " << run.audit_failures << ")\n";
      for (const auto& e : run.errors) std::cerr << e << "\n";
      return run.failed + run.audit_failures > 0 ? 1 : 0;
    }

    if (*scorecmd) {
      const auto table = write_scores(score_dir, load_forecasts(score_dir), p0);
      std::cout << "n " << table.overall.n << ", mae " << table.overall.mae << ", crps " << table.overall.crps
                << ", spread " << table.overall.signs.spread << ", ace " << table.ace << "\n";
      return 0;
    }

    if (*compare) {
      const auto cells = compare_studies(load_forecasts(first), load_forecasts(second), compare_p0, horizon);
      if (compare_out.empty()) {
        write_compare_csv(std::cout, cells);
      } else {
        std::ofstream out(compare_out);
        if (!out) throw std::runtime_error("cannot write " + compare_out);
        write_compare_csv(out, cells);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
