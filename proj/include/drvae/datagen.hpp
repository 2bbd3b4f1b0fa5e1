#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "drvae/dataset.hpp"

namespace drvae {

struct SimuSpec {
  int k = 1;
  int n_train = 500;
  int n_test = 200;
  std::uint64_t seed = 0;
};

// Fully synthetic benchmark: 6 base covariates plus 5k continuous and 10k
// binary noise columns; treatment squashed through a logistic link.
Dataset gen_simu(const SimuSpec& spec);

// Semi-synthetic generators. When no covariate file is supplied, covariates
// with matching shapes and kinds are synthesized from the seed and the
// dataset is flagged synthetic_covariates (results then are not comparable
// with runs on the real corpora).
Dataset gen_ihdp(const std::optional<std::filesystem::path>& covariates,
                 std::uint64_t seed, double train_fraction = 0.8);
Dataset gen_news(const std::optional<std::filesystem::path>& covariates,
                 std::uint64_t seed, double train_fraction = 0.8);

// Plain numeric CSV (comma or whitespace separated, no header); errors name
// the offending row/column.
Eigen::MatrixXd read_covariate_csv(const std::filesystem::path& path,
                                   Eigen::Index expected_rows,
                                   Eigen::Index expected_cols);

}  // namespace drvae
