#pragma once

#include <filesystem>
#include <vector>

#include "drvae/adam.hpp"
#include "drvae/dataset.hpp"
#include "drvae/model.hpp"
#include "drvae/objective.hpp"

namespace drvae {

struct TrainConfig {
  int hidden_dim = 128;
  int num_layers = 3;
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  LossWeights weights;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown mean;           // row-weighted means over the epoch's batches
  double y_decoder_grad_norm = 0.0;  // pre-decay gradient norm, batch mean
};

struct TrainResult {
  std::vector<EpochRecord> log;
};

// Fixed-epoch maximization of the objective over shuffled minibatches.
// Aborts with NumericError naming the first non-finite term and the epoch.
TrainResult train_model(DrvaeModel& model, const Dataset& ds, const TrainConfig& cfg,
                        Rng& rng);

void write_train_log(const std::vector<EpochRecord>& log,
                     const std::filesystem::path& path);

}  // namespace drvae
