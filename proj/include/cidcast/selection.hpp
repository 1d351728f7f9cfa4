#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace cidcast {

enum class SelectionMethod { Omp, Lasso };

struct SelectionResult {
  SelectionMethod method = SelectionMethod::Omp;
  std::vector<Eigen::Index> selected;  // OMP: order of entry; LASSO: ascending
  std::vector<Eigen::Index> skipped;   // OMP: candidates rejected as collinear
  std::vector<double> rss_trace;       // OMP: RSS after each accepted step, rss_trace[0] = |y|^2
  std::vector<double> lambdas;         // LASSO: descending grid
  std::vector<double> cv_error;        // LASSO: mean held-out MSE per lambda
  double lambda = 0.0;                 // LASSO: chosen penalty
  Eigen::VectorXd coef;                // final coefficients over all m columns
};

struct OmpOptions {
  int n_feat = 20;
  double tol = 1e-4;             // minimum relative RSS improvement
  double max_condition = 1e12;   // bound on cond(X_A)^2, i.e. on cond(X_A^T X_A)
};

/// Orthogonal matching pursuit: repeatedly adds the column most correlated
/// with the residual (lowest index on ties) and refits least squares on the
/// active set.
SelectionResult omp_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const OmpOptions& options = {});

struct LassoOptions {
  int folds = 5;
  int n_lambda = 100;
  double lambda_ratio = 1e-3;  // smallest / largest lambda
  bool shuffle = false;
  std::uint64_t seed = 0;
  double tol = 1e-9;  // KKT residual, relative to max(1, rms of centred y)
  int max_sweeps = 100000;
};

/// Solution of (1/2n)|y - b - Xw|^2 + lambda |w|_1 with intercept b, by
/// coordinate descent on the centred Gram matrix.
struct LassoFit {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  int sweeps = 0;
};

/// Largest useful penalty, max_j |x_j^T (y - ybar)| / n over centred columns.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Coefficient path over a descending lambda grid with warm starts. Among
/// exactly duplicated columns only the lowest index may become active.
std::vector<LassoFit> lasso_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const std::vector<double>& lambdas, const LassoOptions& options = {});

std::vector<double> lasso_lambda_grid(double lambda_max, int count, double ratio);

/// Cross-validated LASSO; selected columns are those with non-zero
/// coefficients at the lambda minimising mean k-fold error.
SelectionResult lasso_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoOptions& options = {});

}  // namespace cidcast
