#include "cidcast/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cidcast {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SelectionResult omp_select(const MatrixXd& X, const VectorXd& y, const OmpOptions& options) {
  if (X.rows() == 0) throw std::invalid_argument("omp: no observations");
  if (X.rows() != y.size()) throw std::invalid_argument("omp: X and y lengths differ");
  if (options.n_feat < 1) throw std::invalid_argument("omp: n_feat must be at least 1");
  const Index n = X.rows();
  const Index m = X.cols();

  SelectionResult out;
  out.method = SelectionMethod::Omp;
  out.coef = VectorXd::Zero(m);
  VectorXd r = y;
  double rss = r.squaredNorm();
  out.rss_trace.push_back(rss);
  if (rss == 0.0) return out;
  const double rss0 = rss;

  std::vector<char> excluded(static_cast<std::size_t>(m), 0);
  MatrixXd active(n, 0);
  const auto limit = static_cast<std::size_t>(std::min<Index>(options.n_feat, m));
  while (out.selected.size() < limit) {
    const VectorXd corr = X.transpose() * r;
    Index best = -1;
    double best_abs = 0.0;
    for (Index j = 0; j < m; ++j) {
      if (excluded[static_cast<std::size_t>(j)]) continue;
      if (std::abs(corr(j)) > best_abs) {
        best = j;
        best_abs = std::abs(corr(j));
      }
    }
    if (best < 0) break;

    MatrixXd candidate(n, active.cols() + 1);
    candidate << active, X.col(best);
    Eigen::JacobiSVD<MatrixXd> svd(candidate);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (!(smin > 0.0) || std::pow(sv(0) / smin, 2) > options.max_condition) {
      excluded[static_cast<std::size_t>(best)] = 1;
      out.skipped.push_back(best);
      continue;
    }
    const VectorXd w = candidate.colPivHouseholderQr().solve(y);
    const VectorXd r_new = y - candidate * w;
    const double rss_new = r_new.squaredNorm();
    if (rss - rss_new <= options.tol * rss) break;

    active = std::move(candidate);
    excluded[static_cast<std::size_t>(best)] = 1;
    out.selected.push_back(best);
    r = r_new;
    rss = rss_new;
    out.rss_trace.push_back(rss);
    out.coef.setZero();
    for (std::size_t k = 0; k < out.selected.size(); ++k) out.coef(out.selected[k]) = w(static_cast<Index>(k));
    if (rss <= 1e-24 * rss0) break;
  }
  return out;
}

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace

double lasso_lambda_max(const MatrixXd& X, const VectorXd& y) {
  const VectorXd yc = y.array() - y.mean();
  const MatrixXd Xc = X.rowwise() - X.colwise().mean();
  if (X.cols() == 0) return 0.0;
  return (Xc.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

std::vector<double> lasso_lambda_grid(double lambda_max, int count, double ratio) {
  std::vector<double> out;
  if (count < 1) return out;
  if (count == 1) return {lambda_max};
  const double lo = std::log(lambda_max * ratio);
  const double hi = std::log(lambda_max);
  for (int i = 0; i < count; ++i) out.push_back(std::exp(hi + (lo - hi) * i / (count - 1)));
  out.front() = lambda_max;
  return out;
}

std::vector<LassoFit> lasso_path(const MatrixXd& X, const VectorXd& y, const std::vector<double>& lambdas,
                                 const LassoOptions& options) {
  const Index n = X.rows();
  const Index m = X.cols();
  if (n == 0) throw std::invalid_argument("lasso: no observations");
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const MatrixXd Xc = X.rowwise() - x_mean;
  const VectorXd yc = y.array() - y_mean;
  const MatrixXd G = Xc.transpose() * Xc / static_cast<double>(n);
  const VectorXd c = Xc.transpose() * yc / static_cast<double>(n);

  std::vector<Index> eligible;
  for (Index j = 0; j < m; ++j) {
    if (!(G(j, j) > 0.0)) continue;
    bool duplicate = false;
    for (Index k : eligible) {
      if (G(k, k) == G(j, j) && G(k, j) == G(j, j) && X.col(k) == X.col(j)) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) eligible.push_back(j);
  }

  const double scale = std::max(1.0, std::sqrt(yc.squaredNorm() / static_cast<double>(n)));
  const double threshold = options.tol * scale;
  VectorXd w = VectorXd::Zero(m);
  VectorXd q = VectorXd::Zero(m);  // G w

  auto update = [&](Index j, double lambda) {
    const double old = w(j);
    const double rho = c(j) - (q(j) - G(j, j) * old);
    const double fresh = soft_threshold(rho, lambda) / G(j, j);
    if (fresh != old) {
      q.noalias() += G.col(j) * (fresh - old);
      w(j) = fresh;
    }
  };
  // Largest violation of the optimality conditions.
  auto kkt = [&](Index j, double lambda) {
    const double g = c(j) - q(j);
    if (w(j) == 0.0) return std::max(0.0, std::abs(g) - lambda);
    return std::abs(g - (w(j) > 0.0 ? lambda : -lambda));
  };

  std::vector<Index> active;
  // Solves the stationarity equations on the active set with the current
  // signs; kept only if every sign survives. Coordinate descent crawls when
  // active columns are nearly collinear.
  auto exact_step = [&](double lambda) {
    std::vector<Index> on;
    for (Index j : active) {
      if (w(j) != 0.0) on.push_back(j);
    }
    const auto k = static_cast<Index>(on.size());
    if (k == 0) return false;
    MatrixXd Gaa(k, k);
    VectorXd rhs(k);
    for (Index a = 0; a < k; ++a) {
      for (Index b = 0; b < k; ++b) Gaa(a, b) = G(on[a], on[b]);
      rhs(a) = c(on[a]) - (w(on[a]) > 0.0 ? lambda : -lambda);
    }
    const Eigen::LDLT<MatrixXd> ldlt(Gaa);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    const VectorXd sol = ldlt.solve(rhs);
    if (!sol.allFinite()) return false;
    for (Index a = 0; a < k; ++a) {
      if ((sol(a) > 0.0) != (w(on[a]) > 0.0) || sol(a) == 0.0) return false;
    }
    for (Index a = 0; a < k; ++a) {
      const double delta = sol(a) - w(on[a]);
      if (delta != 0.0) q.noalias() += G.col(on[a]) * delta;
      w(on[a]) = sol(a);
    }
    return true;
  };

  std::vector<LassoFit> path;
  path.reserve(lambdas.size());
  for (double lambda : lambdas) {
    int sweeps = 0;
    while (sweeps < options.max_sweeps) {
      for (Index j : eligible) update(j, lambda);
      ++sweeps;
      double worst = 0.0;
      for (Index j : eligible) worst = std::max(worst, kkt(j, lambda));
      if (worst <= threshold) break;
      // Iterate on the active set until it satisfies the conditions, then re-check all columns.
      active.clear();
      for (Index j : eligible) {
        if (w(j) != 0.0) active.push_back(j);
      }
      int inner_sweeps = 0;
      while (sweeps < options.max_sweeps) {
        for (Index j : active) update(j, lambda);
        ++sweeps;
        double inner = 0.0;
        for (Index j : active) inner = std::max(inner, kkt(j, lambda));
        if (inner <= threshold) break;
        if (++inner_sweeps % 8 == 0 && exact_step(lambda)) break;
      }
    }
    LassoFit fit;
    fit.coef = w;
    fit.intercept = y_mean - x_mean.dot(w);
    fit.sweeps = sweeps;
    path.push_back(std::move(fit));
  }
  return path;
}

SelectionResult lasso_select(const MatrixXd& X, const VectorXd& y, const LassoOptions& options) {
  const Index n = X.rows();
  if (options.folds < 2) throw std::invalid_argument("lasso: at least two folds required");
  if (n < options.folds) throw std::invalid_argument("lasso: fewer observations than folds");
  if (X.rows() != y.size()) throw std::invalid_argument("lasso: X and y lengths differ");

  SelectionResult out;
  out.method = SelectionMethod::Lasso;
  const double lambda_max = lasso_lambda_max(X, y);
  out.coef = VectorXd::Zero(X.cols());
  if (!(lambda_max > 0.0)) {
    out.lambda = 0.0;
    return out;
  }
  out.lambdas = lasso_lambda_grid(lambda_max, options.n_lambda, options.lambda_ratio);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (options.shuffle) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  const auto L = out.lambdas.size();
  out.cv_error.assign(L, 0.0);
  for (int f = 0; f < options.folds; ++f) {
    const Index lo = n * f / options.folds;
    const Index hi = n * (f + 1) / options.folds;
    MatrixXd X_train(n - (hi - lo), X.cols());
    VectorXd y_train(n - (hi - lo));
    MatrixXd X_test(hi - lo, X.cols());
    VectorXd y_test(hi - lo);
    Index tr = 0, te = 0;
    for (Index i = 0; i < n; ++i) {
      const Index row = order[static_cast<std::size_t>(i)];
      if (i >= lo && i < hi) {
        X_test.row(te) = X.row(row);
        y_test(te++) = y(row);
      } else {
        X_train.row(tr) = X.row(row);
        y_train(tr++) = y(row);
      }
    }
    const auto fits = lasso_path(X_train, y_train, out.lambdas, options);
    for (std::size_t l = 0; l < L; ++l) {
      const VectorXd pred = (X_test * fits[l].coef).array() + fits[l].intercept;
      out.cv_error[l] += (pred - y_test).squaredNorm() / static_cast<double>(hi - lo) / options.folds;
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(out.cv_error.begin(), out.cv_error.end()) -
                                             out.cv_error.begin());
  out.lambda = out.lambdas[best];
  const std::vector<double> prefix(out.lambdas.begin(), out.lambdas.begin() + static_cast<long>(best) + 1);
  out.coef = lasso_path(X, y, prefix, options).back().coef;
  for (Index j = 0; j < X.cols(); ++j) {
    if (out.coef(j) != 0.0) out.selected.push_back(j);
  }
  return out;
}

}  // namespace cidcast
