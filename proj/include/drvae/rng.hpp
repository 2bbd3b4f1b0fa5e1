#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

namespace drvae {

// Deterministic random source. All distribution transforms are implemented
// here (not via std:: distributions, whose output is implementation-defined)
// so that a seed yields identical streams on every platform and build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (two engine draws per variate).
  double normal();
  double normal(double mean, double stddev);

  // Unit-scale Gamma(shape), shape > 0 (Marsaglia-Tsang).
  double gamma(double shape);

  // Beta(a, b) as Ga/(Ga+Gb); result nudged into the open interval (0,1).
  double beta(double a, double b);

  bool bernoulli(double p);

  // Uniform integer in [0, n), n > 0, rejection-sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace drvae
