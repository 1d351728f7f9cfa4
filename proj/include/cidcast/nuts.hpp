#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cidcast {

struct NutsOptions {
  int num_samples = 4000;
  int burn_in = 500;
  double init_step = 1e-3;
  double target_accept = 0.8;
  int max_depth = 10;
  double delta_max = 1000.0;
  // Dual averaging.
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  std::uint64_t seed = 0;
};

struct NutsDiagnostics {
  double step_size = 0.0;          // frozen value after burn-in
  double mean_accept = 0.0;        // mean acceptance statistic after burn-in
  int divergences = 0;             // post burn-in iterations ending in a divergence
  int max_depth_hits = 0;
  double mean_depth = 0.0;
  std::vector<double> energy;      // Hamiltonian at the start of each kept iteration
  std::size_t gradient_evals = 0;
  std::vector<std::string> warnings;

  double divergence_rate(int n) const { return n > 0 ? static_cast<double>(divergences) / n : 0.0; }
};

struct NutsRun {
  Eigen::MatrixXd draws;  // num_samples x dim
  NutsDiagnostics diagnostics;
};

/// No-U-Turn sampler with slice sampling and dual-averaging step-size
/// adaptation during burn-in (unit mass matrix). `log_density(theta, grad)`
/// returns log p(theta) up to a constant and writes its gradient. A
/// non-finite density inside a trajectory counts as a divergence; a
/// non-finite gradient at a finite density throws std::runtime_error.
template <class LogDensity>
NutsRun nuts_sample(LogDensity&& log_density, const Eigen::VectorXd& theta0, const NutsOptions& options) {
  using Eigen::VectorXd;
  if (options.num_samples < 1) throw std::invalid_argument("nuts: num_samples must be positive");
  if (options.burn_in < 0) throw std::invalid_argument("nuts: negative burn-in");
  const Eigen::Index dim = theta0.size();

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  std::exponential_distribution<double> exponential;

  NutsRun run;
  run.draws.resize(options.num_samples, dim);
  auto& diag = run.diagnostics;

  auto evaluate = [&](const VectorXd& theta, VectorXd& grad) {
    ++diag.gradient_evals;
    double lp = log_density(theta, grad);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    if (!grad.allFinite()) throw std::runtime_error("nuts: non-finite gradient");
    return lp;
  };

  struct State {
    VectorXd theta, r, grad;
    double logp = 0.0;
  };
  struct Tree {
    State minus, plus, proposal;
    double n = 0.0;
    bool ok = true;
    bool divergent = false;
    double alpha = 0.0;
    double n_alpha = 0.0;
  };

  double eps = options.init_step;
  const double mu = std::log(10.0 * options.init_step);
  double h_bar = 0.0;
  double log_eps_bar = 0.0;

  State current;
  current.theta = theta0;
  current.grad.resize(dim);
  current.logp = evaluate(current.theta, current.grad);
  if (!std::isfinite(current.logp)) throw std::runtime_error("nuts: initial point has zero density");

  auto leapfrog = [&](const State& s, double step) {
    State out;
    out.r = s.r + 0.5 * step * s.grad;
    out.theta = s.theta + step * out.r;
    out.grad.resize(dim);
    out.logp = evaluate(out.theta, out.grad);
    if (std::isfinite(out.logp)) out.r += 0.5 * step * out.grad;
    return out;
  };
  auto no_u_turn = [](const State& minus, const State& plus) {
    const VectorXd span = plus.theta - minus.theta;
    return span.dot(minus.r) >= 0.0 && span.dot(plus.r) >= 0.0;
  };

  double joint0 = 0.0;
  double log_u = 0.0;
  auto build = [&](auto&& self, const State& s, int v, int depth) -> Tree {
    Tree t;
    if (depth == 0) {
      State next = leapfrog(s, v * eps);
      const double joint = next.logp - 0.5 * next.r.squaredNorm();
      t.n = (std::isfinite(joint) && log_u <= joint) ? 1.0 : 0.0;
      t.ok = std::isfinite(joint) && log_u < joint + options.delta_max;
      t.divergent = !t.ok;
      t.alpha = std::isfinite(joint) ? std::min(1.0, std::exp(joint - joint0)) : 0.0;
      t.n_alpha = 1.0;
      t.minus = next;
      t.plus = next;
      t.proposal = std::move(next);
      return t;
    }
    t = self(self, s, v, depth - 1);
    if (!t.ok) return t;
    Tree u = self(self, v == -1 ? t.minus : t.plus, v, depth - 1);
    if (v == -1) {
      t.minus = std::move(u.minus);
    } else {
      t.plus = std::move(u.plus);
    }
    if (u.n > 0.0 && uniform(rng) < u.n / (t.n + u.n)) t.proposal = std::move(u.proposal);
    t.alpha += u.alpha;
    t.n_alpha += u.n_alpha;
    t.divergent = u.divergent;
    t.ok = u.ok && no_u_turn(t.minus, t.plus);
    t.n += u.n;
    return t;
  };

  const int total = options.burn_in + options.num_samples;
  double accept_sum = 0.0;
  double depth_sum = 0.0;
  for (int m = 1; m <= total; ++m) {
    current.r.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) current.r(i) = normal(rng);
    joint0 = current.logp - 0.5 * current.r.squaredNorm();
    log_u = joint0 - exponential(rng);

    State minus = current, plus = current;
    State next = current;
    double n = 1.0;
    bool ok = true;
    bool divergent = false;
    int depth = 0;
    double alpha = 0.0, n_alpha = 0.0;
    while (ok && depth < options.max_depth) {
      const int v = uniform(rng) < 0.5 ? -1 : 1;
      Tree t = build(build, v == -1 ? minus : plus, v, depth);
      if (v == -1) {
        minus = t.minus;
      } else {
        plus = t.plus;
      }
      if (t.ok && uniform(rng) < std::min(1.0, t.n / n)) next = t.proposal;
      n += t.n;
      ok = t.ok && no_u_turn(minus, plus);
      divergent = t.divergent;
      alpha = t.alpha;
      n_alpha = t.n_alpha;
      ++depth;
    }
    current = std::move(next);
    const double accept = n_alpha > 0.0 ? alpha / n_alpha : 0.0;

    if (m <= options.burn_in) {
      const double w = 1.0 / (m + options.t0);
      h_bar = (1.0 - w) * h_bar + w * (options.target_accept - accept);
      const double log_eps = mu - std::sqrt(static_cast<double>(m)) / options.gamma * h_bar;
      const double eta = std::pow(static_cast<double>(m), -options.kappa);
      log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
      eps = std::exp(log_eps);
      if (m == options.burn_in) eps = std::exp(log_eps_bar);
      continue;
    }
    const int k = m - options.burn_in - 1;
    run.draws.row(k) = current.theta.transpose();
    accept_sum += accept;
    depth_sum += depth;
    if (divergent) ++diag.divergences;
    if (depth >= options.max_depth && ok) ++diag.max_depth_hits;
    diag.energy.push_back(-joint0);
  }
  diag.step_size = eps;
  diag.mean_accept = accept_sum / options.num_samples;
  diag.mean_depth = depth_sum / options.num_samples;
  if (diag.divergence_rate(options.num_samples) > 0.2) {
    diag.warnings.push_back("nuts: " + std::to_string(diag.divergences) + " of " +
                            std::to_string(options.num_samples) + " iterations diverged (step size " +
                            std::to_string(eps) + ")");
  }
  return run;
}

/// Split-R-hat per coordinate over chains of equal length (at least 4 draws each).
Eigen::VectorXd split_rhat(const std::vector<Eigen::MatrixXd>& chains);

}  // namespace cidcast
