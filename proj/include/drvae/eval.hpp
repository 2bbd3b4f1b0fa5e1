#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "drvae/dataset.hpp"
#include "drvae/model.hpp"

namespace drvae {

enum class GridKind : std::uint8_t { ObservedTreatments, RombergGrid };

struct DoseGrid {
  std::vector<double> points;  // sorted, within [0,1]
  GridKind kind = GridKind::RombergGrid;

  // 2^m + 1 equally spaced points spanning [0,1] (default 65).
  static DoseGrid romberg(int m = 6);
  static DoseGrid observed(std::span<const double> doses);

  Eigen::Index size() const { return static_cast<Eigen::Index>(points.size()); }
};

// Integrate samples of f on 2^m+1 equally spaced points over [a,b] via the
// full Romberg tableau; exact for polynomials up to degree 2m+1.
double romberg_integrate(std::span<const double> fvals, double a, double b);

using NoiseFn = std::function<ad::Matrix(Eigen::Index, Eigen::Index)>;

// Counterfactual outcome per row at one dose: confounding and adjustment
// factors are sampled l times from their posteriors and the outcome-decoder
// means are averaged. The instrumental and noise factors are not consulted.
Eigen::VectorXd predict_outcome(const DrvaeModel& model, const ad::Matrix& x,
                                double dose, int l, Rng& rng);
Eigen::VectorXd predict_outcome_with_noise(const DrvaeModel& model,
                                           const ad::Matrix& x, double dose, int l,
                                           const NoiseFn& noise);

// Row-major curves: entry (i, j) is the prediction for row i at grid point j.
ad::Matrix predict_curves(const DrvaeModel& model, const ad::Matrix& x,
                          const DoseGrid& grid, int l, Rng& rng);

// Noiseless truth curves from the dataset oracle over the same grid.
ad::Matrix oracle_curves(const Dataset& ds, const std::vector<Eigen::Index>& rows,
                         const DoseGrid& grid);

// Average dose-response estimate over the supplied rows.
std::vector<double> estimate_adrf(const DrvaeModel& model, const ad::Matrix& x,
                                  const DoseGrid& grid, int l, Rng& rng);

// Population curve error over observed doses (columns of the curve matrices).
double amse(const ad::Matrix& yhat, const ad::Matrix& ytrue);
// Mean over rows of the Romberg-integrated squared curve error.
double mise(const ad::Matrix& yhat, const ad::Matrix& ytrue, const DoseGrid& grid);
// Outcome regret of dosing at the predicted-optimal grid point.
double dpe(const ad::Matrix& yhat, const ad::Matrix& ytrue);
// Mean squared curve error per row per grid point.
double i_mse(const ad::Matrix& yhat, const ad::Matrix& ytrue);

struct SeedMetrics {
  std::uint64_t seed = 0;
  double amse = 0.0;
  double sqrt_mise = 0.0;
  double sqrt_dpe = 0.0;
  double i_mse = 0.0;
};

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;
};

struct MetricsReport {
  int n_seeds = 0;
  bool has_std = false;  // requires >= 2 seeds
  MetricStats amse, sqrt_mise, sqrt_dpe, i_mse;
};

// Mean and sample standard deviation per metric; square roots were already
// applied per seed.
MetricsReport aggregate(std::span<const SeedMetrics> seeds);

}  // namespace drvae
