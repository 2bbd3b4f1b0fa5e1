#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drvae/datagen.hpp"
#include "drvae/eval.hpp"
#include "drvae/train.hpp"

namespace drvae {

enum class DatasetKind { Simu, Ihdp, News };

std::string dataset_kind_name(DatasetKind kind);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Simu;
  int k = 1;  // simu only
  std::optional<std::filesystem::path> covariates;
  double train_fraction = 0.8;
};

// Per-dataset training defaults (hidden size, schedule and loss weights).
TrainConfig default_train_config(DatasetKind kind);

Dataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed);

struct ExperimentConfig {
  DatasetSpec data;
  TrainConfig train;
  LatentConfig latent;
  int n_seeds = 10;
  int l = 20;
  std::uint64_t base_seed = 0;
  int jobs = 1;
  std::filesystem::path out_dir = "out";
  bool save_artifacts = true;
};

struct SeedRunResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  SeedMetrics metrics;
};

struct ExperimentResult {
  std::vector<SeedRunResult> seeds;
  MetricsReport report;  // aggregated over the successful seeds
  bool all_ok = false;
};

// Distinct rng streams hanging off one run seed.
Rng make_rng(std::uint64_t seed, const char* purpose);

// generate -> train -> evaluate for one seed; artifacts (checkpoint,
// training log, ADRF curve, metrics line) land in seed_dir when given.
SeedMetrics run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                     const std::optional<std::filesystem::path>& seed_dir);

// Multi-seed repetition with seeds base_seed..base_seed+n-1; failed seeds
// are listed in the report rather than aborting the others.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepPoint {
  double value = 0.0;
  ExperimentResult result;
};

// One experiment per value of the swept parameter (a loss weight or a
// latent dimension).
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                  const std::string& parameter,
                                  const std::vector<double>& values);

void apply_sweep_parameter(ExperimentConfig& cfg, const std::string& parameter,
                           double value);

// Evaluation of one trained model on the dataset's test split, including the
// artifact files. `oracle_predictor` substitutes the noiseless truth for the
// model predictions (plumbing check: every metric must then be zero).
SeedMetrics evaluate_model(const DrvaeModel& model, const Dataset& ds, int l,
                           Rng& rng,
                           const std::optional<std::filesystem::path>& out_dir,
                           bool oracle_predictor = false);

void write_seed_details(const std::vector<SeedRunResult>& seeds,
                        const std::filesystem::path& path);
void write_report(const MetricsReport& report, const std::string& method,
                  const std::string& dataset, const std::filesystem::path& path);

}  // namespace drvae
