#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace drvae {

enum class ColumnKind : std::uint8_t { Continuous, Binary };
enum class Split : std::uint8_t { Train, Test };

// Everything needed to rebuild the noiseless outcome function after a
// round trip through disk; oracles are never serialized as closures.
struct GeneratorInfo {
  std::string name;  // "simu" | "ihdp" | "news"
  int k = 0;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  bool synthetic_covariates = false;
  double c1 = 0.0;  // ihdp: empirical mean of the adjustment-group average
  double c2 = 0.0;  // ihdp: empirical mean of the instrument-group average
  Eigen::MatrixXd news_v;  // news: rows v1, v2, v3 (unit norm)
};

struct Dataset {
  Eigen::MatrixXd x;  // n x p
  std::vector<ColumnKind> column_kind;
  Eigen::VectorXd t;  // in [0,1]
  Eigen::VectorXd y;
  std::vector<Split> split;
  GeneratorInfo generator;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }

  std::vector<Eigen::Index> rows_of(Split s) const;
  Eigen::MatrixXd x_rows(const std::vector<Eigen::Index>& rows) const;

  bool has_oracle() const;
  // Noiseless outcome at the given dose for one stored row.
  double oracle(Eigen::Index row, double dose) const;

  // Checks the structural invariants (binary columns, treatment range,
  // matching lengths); throws IngestionError on violation.
  void validate() const;
};

std::string column_kind_string(const std::vector<ColumnKind>& kinds);
std::vector<ColumnKind> parse_column_kind_string(const std::string& s);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Noiseless outcome equations, exposed for tests and oracle evaluation.
double simu_outcome_noiseless(const Eigen::RowVectorXd& x, double dose);
double ihdp_outcome_noiseless(const Eigen::RowVectorXd& x, double dose, double c1);
double news_outcome_noiseless(const Eigen::RowVectorXd& x, double dose,
                              const Eigen::MatrixXd& v);

}  // namespace drvae
