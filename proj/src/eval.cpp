#include "drvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drvae/rng.hpp"
#include "drvae/textio.hpp"

namespace drvae {

namespace {

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

void require_romberg_grid(const DoseGrid& grid, Eigen::Index curve_cols) {
  if (grid.kind != GridKind::RombergGrid) {
    throw ContractError("mise: requires a Romberg grid");
  }
  if (grid.size() != curve_cols) {
    throw ContractError("mise: grid has " + std::to_string(grid.size()) +
                        " points but curves have " + std::to_string(curve_cols) +
                        " columns");
  }
}

void require_same_curves(const char* op, const ad::Matrix& a, const ad::Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": curve matrices are " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
  if (a.size() == 0) throw ContractError(std::string(op) + ": empty curves");
}

}  // namespace

DoseGrid DoseGrid::romberg(int m) {
  if (m < 1 || m > 24) throw ContractError("romberg grid: m must be in 1..24");
  const int n = (1 << m) + 1;
  DoseGrid grid;
  grid.kind = GridKind::RombergGrid;
  grid.points.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    grid.points[static_cast<std::size_t>(i)] =
        static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return grid;
}

DoseGrid DoseGrid::observed(std::span<const double> doses) {
  DoseGrid grid;
  grid.kind = GridKind::ObservedTreatments;
  grid.points.assign(doses.begin(), doses.end());
  std::sort(grid.points.begin(), grid.points.end());
  return grid;
}

double romberg_integrate(std::span<const double> fvals, double a, double b) {
  const std::size_t n = fvals.size();
  if (n < 2 || !is_power_of_two(n - 1)) {
    throw ContractError("romberg_integrate: needs 2^m+1 samples, got " +
                        std::to_string(n));
  }
  int m = 0;
  while ((std::size_t{1} << m) != n - 1) ++m;

  std::vector<double> prev(static_cast<std::size_t>(m) + 1);
  std::vector<double> curr(static_cast<std::size_t>(m) + 1);
  // Trapezoid on 2^k sub-sampled intervals, refined by Richardson steps.
  for (int k = 0; k <= m; ++k) {
    const std::size_t intervals = std::size_t{1} << k;
    const std::size_t stride = (n - 1) / intervals;
    const double h = (b - a) / static_cast<double>(intervals);
    double trap = 0.5 * (fvals[0] + fvals[n - 1]);
    for (std::size_t i = 1; i < intervals; ++i) trap += fvals[i * stride];
    curr[0] = h * trap;
    double pow4 = 1.0;
    for (int j = 1; j <= k; ++j) {
      pow4 *= 4.0;
      curr[static_cast<std::size_t>(j)] =
          curr[static_cast<std::size_t>(j - 1)] +
          (curr[static_cast<std::size_t>(j - 1)] -
           prev[static_cast<std::size_t>(j - 1)]) /
              (pow4 - 1.0);
    }
    std::swap(prev, curr);
  }
  return prev[static_cast<std::size_t>(m)];
}

Eigen::VectorXd predict_outcome_with_noise(const DrvaeModel& model,
                                           const ad::Matrix& x, double dose, int l,
                                           const NoiseFn& noise) {
  if (x.rows() == 0) throw ContractError("predict_outcome: empty row batch");
  if (l < 1) throw ContractError("predict_outcome: sample count must be >= 1");
  if (!(dose >= 0.0 && dose <= 1.0)) {
    throw DomainError("predict_outcome: dose " + format_double(dose) +
                      " outside [0,1]");
  }
  const Eigen::Index n = x.rows();
  const FactorPosterior post = model.encode(x);
  const ad::Matrix mu_d = post.delta.mean.data();
  const ad::Matrix sd_d = post.delta.variance.data().array().sqrt();
  const ad::Matrix mu_u = post.upsilon.mean.data();
  const ad::Matrix sd_u = post.upsilon.variance.data().array().sqrt();

  // All l draws are stacked into one (n*l)-row decode for throughput; draw
  // order per sample is delta then upsilon.
  ad::Matrix z_d(n * l, mu_d.cols());
  ad::Matrix z_u(n * l, mu_u.cols());
  for (int s = 0; s < l; ++s) {
    z_d.middleRows(s * n, n) =
        mu_d + sd_d.cwiseProduct(noise(n, mu_d.cols()));
    z_u.middleRows(s * n, n) =
        mu_u + sd_u.cwiseProduct(noise(n, mu_u.cols()));
  }
  const Eigen::VectorXd doses = Eigen::VectorXd::Constant(n * l, dose);
  const ad::Matrix mu_y =
      model.decode_y(doses, ad::Value(z_d), ad::Value(z_u)).first.data();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < l; ++s) out += mu_y.col(0).segment(s * n, n);
  return out / static_cast<double>(l);
}

Eigen::VectorXd predict_outcome(const DrvaeModel& model, const ad::Matrix& x,
                                double dose, int l, Rng& rng) {
  return predict_outcome_with_noise(
      model, x, dose, l,
      [&rng](Eigen::Index r, Eigen::Index c) { return rng.normal_matrix(r, c); });
}

ad::Matrix predict_curves(const DrvaeModel& model, const ad::Matrix& x,
                          const DoseGrid& grid, int l, Rng& rng) {
  if (grid.size() == 0) throw ContractError("predict_curves: empty grid");
  ad::Matrix curves(x.rows(), grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    curves.col(j) =
        predict_outcome(model, x, grid.points[static_cast<std::size_t>(j)], l, rng);
  }
  return curves;
}

ad::Matrix oracle_curves(const Dataset& ds, const std::vector<Eigen::Index>& rows,
                         const DoseGrid& grid) {
  if (!ds.has_oracle()) throw ContractError("oracle_curves: dataset has no oracle");
  ad::Matrix curves(static_cast<Eigen::Index>(rows.size()), grid.size());
  for (Eigen::Index i = 0; i < curves.rows(); ++i) {
    for (Eigen::Index j = 0; j < curves.cols(); ++j) {
      curves(i, j) = ds.oracle(rows[static_cast<std::size_t>(i)],
                               grid.points[static_cast<std::size_t>(j)]);
    }
  }
  return curves;
}

std::vector<double> estimate_adrf(const DrvaeModel& model, const ad::Matrix& x,
                                  const DoseGrid& grid, int l, Rng& rng) {
  if (x.rows() == 0) throw ContractError("estimate_adrf: empty test set");
  const ad::Matrix curves = predict_curves(model, x, grid, l, rng);
  std::vector<double> psi(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    psi[static_cast<std::size_t>(j)] = curves.col(j).mean();
  }
  return psi;
}

double amse(const ad::Matrix& yhat, const ad::Matrix& ytrue) {
  require_same_curves("amse", yhat, ytrue);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < yhat.cols(); ++j) {
    const double mean_err = (yhat.col(j) - ytrue.col(j)).mean();
    acc += mean_err * mean_err;
  }
  return acc / static_cast<double>(yhat.cols());
}

double mise(const ad::Matrix& yhat, const ad::Matrix& ytrue, const DoseGrid& grid) {
  require_same_curves("mise", yhat, ytrue);
  require_romberg_grid(grid, yhat.cols());
  const double a = grid.points.front();
  const double b = grid.points.back();
  double acc = 0.0;
  std::vector<double> sq(static_cast<std::size_t>(yhat.cols()));
  for (Eigen::Index i = 0; i < yhat.rows(); ++i) {
    for (Eigen::Index j = 0; j < yhat.cols(); ++j) {
      const double d = yhat(i, j) - ytrue(i, j);
      sq[static_cast<std::size_t>(j)] = d * d;
    }
    acc += romberg_integrate(sq, a, b);
  }
  return acc / static_cast<double>(yhat.rows());
}

double dpe(const ad::Matrix& yhat, const ad::Matrix& ytrue) {
  require_same_curves("dpe", yhat, ytrue);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < yhat.rows(); ++i) {
    // argmax with ties broken toward the smallest dose
    Eigen::Index best_true = 0, best_pred = 0;
    for (Eigen::Index j = 1; j < yhat.cols(); ++j) {
      if (ytrue(i, j) > ytrue(i, best_true)) best_true = j;
      if (yhat(i, j) > yhat(i, best_pred)) best_pred = j;
    }
    const double d = ytrue(i, best_true) - ytrue(i, best_pred);
    acc += d * d;
  }
  return acc / static_cast<double>(yhat.rows());
}

double i_mse(const ad::Matrix& yhat, const ad::Matrix& ytrue) {
  require_same_curves("i_mse", yhat, ytrue);
  return (yhat - ytrue).array().square().mean();
}

MetricsReport aggregate(std::span<const SeedMetrics> seeds) {
  if (seeds.empty()) throw ContractError("aggregate: no seed metrics");
  MetricsReport report;
  report.n_seeds = static_cast<int>(seeds.size());
  report.has_std = seeds.size() >= 2;
  auto stats = [&seeds](auto field) {
    MetricStats s;
    for (const SeedMetrics& m : seeds) s.mean += field(m);
    s.mean /= static_cast<double>(seeds.size());
    if (seeds.size() >= 2) {
      double acc = 0.0;
      for (const SeedMetrics& m : seeds) {
        const double d = field(m) - s.mean;
        acc += d * d;
      }
      s.std = std::sqrt(acc / static_cast<double>(seeds.size() - 1));
    } else {
      s.std = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
  };
  report.amse = stats([](const SeedMetrics& m) { return m.amse; });
  report.sqrt_mise = stats([](const SeedMetrics& m) { return m.sqrt_mise; });
  report.sqrt_dpe = stats([](const SeedMetrics& m) { return m.sqrt_dpe; });
  report.i_mse = stats([](const SeedMetrics& m) { return m.i_mse; });
  return report;
}

}  // namespace drvae
