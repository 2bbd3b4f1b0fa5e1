#include "drvae/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drvae/errors.hpp"
#include "drvae/rng.hpp"
#include "drvae/textio.hpp"

namespace drvae {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kIhdpRows = 747;
constexpr int kIhdpCols = 25;
constexpr int kNewsRows = 3000;
constexpr int kNewsCols = 498;

// 0-based IHDP feature groups (1-based in the generator equations:
// continuous {1,2,3,5,6}, adjustment {4,7..15}, instruments {16..25}).
const std::vector<int> kIhdpContinuous = {0, 1, 2, 4, 5};
const std::vector<int> kIhdpAdjustment = {3, 6, 7, 8, 9, 10, 11, 12, 13, 14};
const std::vector<int> kIhdpInstrument = {15, 16, 17, 18, 19, 20, 21, 22, 23, 24};

double logistic_link(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double simu_latent_treatment(const Eigen::RowVectorXd& x) {
  const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3), x5 = x(4);
  double v = (10.0 * std::sin(std::max({x1, x2, x3})) +
              std::pow(std::max({x3, x4, x5}), 3)) /
             (1.0 + (x1 + x5) * (x1 + x5));
  v += std::sin(0.5 * x3) * (1.0 + std::exp(x4 - 0.5 * x3));
  v += x3 * x3 + 2.0 * std::sin(x4) + 2.0 * x5 - 6.5;
  return v;
}

double ihdp_latent_treatment(const Eigen::RowVectorXd& x, double c2) {
  double inst = 0.0;
  for (int j : kIhdpInstrument) inst += x(j) - c2;
  inst /= static_cast<double>(kIhdpInstrument.size());
  return 2.0 * x(0) / (1.0 + x(1)) +
         2.0 * std::max({x(2), x(4), x(5)}) /
             (0.2 + std::min({x(2), x(4), x(5)})) +
         2.0 * std::tanh(5.0 * inst) - 4.0;
}

void assign_shuffled_split(Dataset& ds, double train_fraction, Rng& rng) {
  const auto n = ds.n();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  rng.shuffle(order);
  const auto n_train =
      static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(n)));
  ds.split.assign(static_cast<std::size_t>(n), Split::Test);
  for (Eigen::Index i = 0; i < n_train; ++i) {
    ds.split[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        Split::Train;
  }
}

}  // namespace

Dataset gen_simu(const SimuSpec& spec) {
  if (spec.k < 1 || spec.k > 5) {
    throw ConfigError("simu: k must be in 1..5, got " + std::to_string(spec.k));
  }
  if (spec.n_train < 1 || spec.n_test < 1) {
    throw ConfigError("simu: split sizes must be positive");
  }
  const int n = spec.n_train + spec.n_test;
  const int n_con_noise = 5 * spec.k;
  const int n_bin_noise = 10 * spec.k;
  const int p = 6 + n_con_noise + n_bin_noise;

  Rng rng(spec.seed);
  Dataset ds;
  ds.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 6; ++j) ds.x(i, j) = rng.uniform();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n_con_noise; ++j)
      ds.x(i, 6 + j) = rng.normal(2.0, std::sqrt(10.0));
  for (int j = 0; j < n_bin_noise; ++j) {
    const double p_col = rng.uniform();
    for (int i = 0; i < n; ++i)
      ds.x(i, 6 + n_con_noise + j) = rng.bernoulli(p_col) ? 1.0 : 0.0;
  }
  ds.column_kind.assign(static_cast<std::size_t>(p), ColumnKind::Continuous);
  for (int j = 0; j < n_bin_noise; ++j) {
    ds.column_kind[static_cast<std::size_t>(6 + n_con_noise + j)] = ColumnKind::Binary;
  }
  ds.t.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.t(i) = logistic_link(simu_latent_treatment(ds.x.row(i)) + rng.normal(0.0, 0.5));
  }
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.y(i) = simu_outcome_noiseless(ds.x.row(i), ds.t(i)) + rng.normal(0.0, 0.5);
  }
  ds.split.assign(static_cast<std::size_t>(n), Split::Test);
  for (int i = 0; i < spec.n_train; ++i) ds.split[static_cast<std::size_t>(i)] = Split::Train;
  ds.generator.name = "simu";
  ds.generator.k = spec.k;
  ds.generator.seed = spec.seed;
  return ds;
}

Eigen::MatrixXd read_covariate_csv(const std::filesystem::path& path,
                                   Eigen::Index expected_rows,
                                   Eigen::Index expected_cols) {
  const std::string text = read_file(path);
  Eigen::MatrixXd m(expected_rows, expected_cols);
  Eigen::Index row = 0;
  std::size_t pos = 0;
  long lineno = 0;
  while (pos < text.size()) {
    ++lineno;
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    auto is_sep = [](char c) {
      return c == ',' || c == ' ' || c == '\t' || c == '\r';
    };
    while (i < line.size()) {
      while (i < line.size() && is_sep(line[i])) ++i;
      std::size_t start = i;
      while (i < line.size() && !is_sep(line[i])) ++i;
      if (i > start) toks.push_back(line.substr(start, i - start));
    }
    if (toks.empty()) continue;
    if (row >= expected_rows) {
      throw IngestionError(path.string() + ": more than " +
                           std::to_string(expected_rows) + " data rows");
    }
    if (static_cast<Eigen::Index>(toks.size()) != expected_cols) {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": row " +
                           std::to_string(row + 1) + " has " +
                           std::to_string(toks.size()) + " columns, expected " +
                           std::to_string(expected_cols));
    }
    for (Eigen::Index j = 0; j < expected_cols; ++j) {
      m(row, j) = parse_double(toks[static_cast<std::size_t>(j)],
                               path.string() + ":" + std::to_string(lineno) +
                                   " column " + std::to_string(j + 1));
    }
    ++row;
  }
  if (row != expected_rows) {
    throw IngestionError(path.string() + ": found " + std::to_string(row) +
                         " rows, expected " + std::to_string(expected_rows));
  }
  return m;
}

Dataset gen_ihdp(const std::optional<std::filesystem::path>& covariates,
                 std::uint64_t seed, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("ihdp: train_fraction must lie in (0,1)");
  }
  Rng rng(seed);
  Dataset ds;
  ds.generator.name = "ihdp";
  ds.generator.seed = seed;
  ds.generator.train_fraction = train_fraction;

  if (covariates) {
    ds.x = read_covariate_csv(*covariates, kIhdpRows, kIhdpCols);
  } else {
    ds.generator.synthetic_covariates = true;
    ds.x.resize(kIhdpRows, kIhdpCols);
    for (int i = 0; i < kIhdpRows; ++i) {
      for (int j = 0; j < kIhdpCols; ++j) {
        const bool continuous =
            std::find(kIhdpContinuous.begin(), kIhdpContinuous.end(), j) !=
            kIhdpContinuous.end();
        ds.x(i, j) = continuous ? rng.uniform() : (rng.bernoulli(0.5) ? 1.0 : 0.0);
      }
    }
  }

  ds.column_kind.assign(kIhdpCols, ColumnKind::Binary);
  for (int j : kIhdpContinuous) {
    ds.column_kind[static_cast<std::size_t>(j)] = ColumnKind::Continuous;
  }
  for (int j = 0; j < kIhdpCols; ++j) {
    if (ds.column_kind[static_cast<std::size_t>(j)] != ColumnKind::Binary) continue;
    for (int i = 0; i < kIhdpRows; ++i) {
      const double v = ds.x(i, j);
      if (v != 0.0 && v != 1.0) {
        throw IngestionError("ihdp covariates: non-binary entry at row " +
                             std::to_string(i + 1) + ", column " +
                             std::to_string(j + 1));
      }
    }
  }
  // Min-max scale the continuous features onto [0,1].
  for (int j : kIhdpContinuous) {
    const double lo = ds.x.col(j).minCoeff();
    const double hi = ds.x.col(j).maxCoeff();
    if (!(hi > lo)) {
      throw IngestionError("ihdp covariates: constant continuous column " +
                           std::to_string(j + 1));
    }
    ds.x.col(j) = (ds.x.col(j).array() - lo) / (hi - lo);
  }

  auto group_mean = [&ds](const std::vector<int>& cols) {
    double total = 0.0;
    for (int i = 0; i < kIhdpRows; ++i) {
      double s = 0.0;
      for (int j : cols) s += ds.x(i, j);
      total += s / static_cast<double>(cols.size());
    }
    return total / static_cast<double>(kIhdpRows);
  };
  ds.generator.c1 = group_mean(kIhdpAdjustment);
  ds.generator.c2 = group_mean(kIhdpInstrument);

  ds.t.resize(kIhdpRows);
  for (int i = 0; i < kIhdpRows; ++i) {
    ds.t(i) = logistic_link(ihdp_latent_treatment(ds.x.row(i), ds.generator.c2) +
                            rng.normal(0.0, 0.5));
  }
  ds.y.resize(kIhdpRows);
  for (int i = 0; i < kIhdpRows; ++i) {
    ds.y(i) = ihdp_outcome_noiseless(ds.x.row(i), ds.t(i), ds.generator.c1) +
              rng.normal(0.0, 0.5);
  }
  assign_shuffled_split(ds, train_fraction, rng);
  return ds;
}

Dataset gen_news(const std::optional<std::filesystem::path>& covariates,
                 std::uint64_t seed, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("news: train_fraction must lie in (0,1)");
  }
  Rng rng(seed);
  Dataset ds;
  ds.generator.name = "news";
  ds.generator.seed = seed;
  ds.generator.train_fraction = train_fraction;

  Eigen::MatrixXd counts;
  if (covariates) {
    counts = read_covariate_csv(*covariates, kNewsRows, kNewsCols);
    for (int i = 0; i < kNewsRows; ++i) {
      for (int j = 0; j < kNewsCols; ++j) {
        if (counts(i, j) < 0.0) {
          throw IngestionError("news covariates: negative count at row " +
                               std::to_string(i + 1) + ", column " +
                               std::to_string(j + 1));
        }
      }
      if (counts.row(i).sum() <= 0.0) {
        throw IngestionError("news covariates: row " + std::to_string(i + 1) +
                             " is all zero");
      }
    }
  } else {
    ds.generator.synthetic_covariates = true;
    counts.resize(kNewsRows, kNewsCols);
    for (int i = 0; i < kNewsRows; ++i) {
      for (int attempt = 0;; ++attempt) {
        for (int j = 0; j < kNewsCols; ++j) {
          counts(i, j) =
              rng.bernoulli(0.2) ? static_cast<double>(1 + rng.below(5)) : 0.0;
        }
        if (counts.row(i).sum() > 0.0) break;
        if (attempt >= 100) throw NumericError("news: could not draw a nonzero row");
      }
    }
  }
  // Bag-of-words counts normalized to per-row proportions.
  ds.x = counts.array().colwise() / counts.rowwise().sum().array();
  ds.column_kind.assign(kNewsCols, ColumnKind::Continuous);

  Eigen::MatrixXd v(3, kNewsCols);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < kNewsCols; ++j) v(i, j) = rng.normal();
      v.row(i) /= v.row(i).norm();
    }
    ok = true;
    for (int i = 0; i < kNewsRows && ok; ++i) {
      const double v2x = v.row(1).dot(ds.x.row(i));
      const double v3x = v.row(2).dot(ds.x.row(i));
      if (v2x == 0.0 || v3x == 0.0) ok = false;
    }
  }
  if (!ok) {
    throw NumericError(
        "news: projection vectors degenerate for some row after 100 attempts");
  }
  ds.generator.news_v = v;

  ds.t.resize(kNewsRows);
  for (int i = 0; i < kNewsRows; ++i) {
    const double v2x = v.row(1).dot(ds.x.row(i));
    const double v3x = v.row(2).dot(ds.x.row(i));
    ds.t(i) = rng.beta(2.0, std::abs(v3x / (2.0 * v2x)));
  }
  ds.y.resize(kNewsRows);
  for (int i = 0; i < kNewsRows; ++i) {
    ds.y(i) = news_outcome_noiseless(ds.x.row(i), ds.t(i), v) +
              rng.normal(0.0, std::sqrt(0.5));
  }
  assign_shuffled_split(ds, train_fraction, rng);
  return ds;
}

}  // namespace drvae
