#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

// Independent double-loop references for the evaluation metrics. Kept free of
// any shared code with the library implementations they check.
namespace drvae::testing {

inline double naive_amse(const Eigen::MatrixXd& yhat, const Eigen::MatrixXd& ytrue) {
  double outer = 0.0;
  for (Eigen::Index j = 0; j < yhat.cols(); ++j) {
    double inner = 0.0;
    for (Eigen::Index i = 0; i < yhat.rows(); ++i) inner += yhat(i, j) - ytrue(i, j);
    inner /= static_cast<double>(yhat.rows());
    outer += inner * inner;
  }
  return outer / static_cast<double>(yhat.cols());
}

inline double naive_i_mse(const Eigen::MatrixXd& yhat, const Eigen::MatrixXd& ytrue) {
  double outer = 0.0;
  for (Eigen::Index i = 0; i < yhat.rows(); ++i) {
    double inner = 0.0;
    for (Eigen::Index j = 0; j < yhat.cols(); ++j) {
      const double d = yhat(i, j) - ytrue(i, j);
      inner += d * d;
    }
    outer += inner / static_cast<double>(yhat.cols());
  }
  return outer / static_cast<double>(yhat.rows());
}

inline double naive_dpe(const Eigen::MatrixXd& yhat, const Eigen::MatrixXd& ytrue) {
  double outer = 0.0;
  for (Eigen::Index i = 0; i < yhat.rows(); ++i) {
    Eigen::Index bt = 0, bp = 0;
    for (Eigen::Index j = 1; j < yhat.cols(); ++j) {
      if (ytrue(i, j) > ytrue(i, bt)) bt = j;
      if (yhat(i, j) > yhat(i, bp)) bp = j;
    }
    const double d = ytrue(i, bt) - ytrue(i, bp);
    outer += d * d;
  }
  return outer / static_cast<double>(yhat.rows());
}

// Romberg tableau built recursively from scratch over 2^m+1 samples.
inline double naive_romberg(const std::vector<double>& f, double a, double b) {
  int m = 0;
  while ((std::size_t{1} << m) + 1 != f.size()) ++m;
  std::vector<std::vector<double>> r(static_cast<std::size_t>(m) + 1);
  for (int k = 0; k <= m; ++k) {
    r[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(k) + 1);
    const std::size_t pieces = std::size_t{1} << k;
    const std::size_t stride = (f.size() - 1) / pieces;
    const double h = (b - a) / static_cast<double>(pieces);
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i < pieces; ++i) s += f[i * stride];
    r[static_cast<std::size_t>(k)][0] = h * s;
    for (int j = 1; j <= k; ++j) {
      const double hi = r[static_cast<std::size_t>(k)][static_cast<std::size_t>(j - 1)];
      const double lo =
          r[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j - 1)];
      r[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
          hi + (hi - lo) / (std::pow(4.0, j) - 1.0);
    }
  }
  return r[static_cast<std::size_t>(m)][static_cast<std::size_t>(m)];
}

inline double naive_mise(const Eigen::MatrixXd& yhat, const Eigen::MatrixXd& ytrue,
                         double a, double b) {
  double outer = 0.0;
  for (Eigen::Index i = 0; i < yhat.rows(); ++i) {
    std::vector<double> sq(static_cast<std::size_t>(yhat.cols()));
    for (Eigen::Index j = 0; j < yhat.cols(); ++j) {
      const double d = yhat(i, j) - ytrue(i, j);
      sq[static_cast<std::size_t>(j)] = d * d;
    }
    outer += naive_romberg(sq, a, b);
  }
  return outer / static_cast<double>(yhat.rows());
}

// Brute-force trapezoid with a million panels, for cross-checking Romberg.
inline double trapezoid_1e6(const std::function<double(double)>& f, double a,
                            double b) {
  const int n = 1000000;
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + h * i);
  return s * h;
}

}  // namespace drvae::testing
