#include "drvae/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "drvae/rng.hpp"
#include "drvae/textio.hpp"

namespace drvae {

namespace {

// Name of the first non-finite entry, in breakdown order; empty when clean.
std::string first_non_finite(const LossBreakdown& bd) {
  const std::pair<const char*, double> entries[] = {
      {"recon_x", bd.recon_x}, {"kl_sum", bd.kl_sum}, {"aux_t", bd.aux_t},
      {"aux_y", bd.aux_y},     {"reg", bd.reg},       {"total", bd.total}};
  for (const auto& [name, v] : entries) {
    if (!std::isfinite(v)) return name;
  }
  return {};
}

}  // namespace

void TrainConfig::validate() const {
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  weights.validate();
}

TrainResult train_model(DrvaeModel& model, const Dataset& ds, const TrainConfig& cfg,
                        Rng& rng) {
  cfg.validate();
  const auto train_rows = ds.rows_of(Split::Train);
  if (train_rows.empty()) throw ContractError("train: dataset has no train rows");

  const auto params = model.parameters();
  const auto y_dec_params = model.outcome_decoder_parameters();
  AdamState adam(params, AdamConfig{cfg.learning_rate, cfg.weight_decay});

  TrainResult result;
  std::vector<Eigen::Index> order = train_rows;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    LossBreakdown acc;
    double grad_norm_acc = 0.0;
    int batches = 0;
    std::size_t used = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const std::size_t len =
          std::min<std::size_t>(cfg.batch_size, order.size() - at);
      const std::vector<Eigen::Index> rows(order.begin() + at,
                                           order.begin() + at + len);
      const Batch batch = make_batch(ds, rows);
      const FactorPosterior post = model.encode(batch.x);
      const FactorSamples samples = model.sample_posterior(post, rng);
      const ObjectiveTerms terms =
          build_objective(model, batch, post, samples, cfg.weights);
      const LossBreakdown bd = terms.values();
      if (!std::isfinite(bd.total)) {
        throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                           ": first non-finite term is " + first_non_finite(bd));
      }
      ad::zero_grads(params);
      ad::backward(ad::scale(terms.total, -1.0));
      double sq = 0.0;
      for (const ad::Value& p : y_dec_params) sq += p.grad().squaredNorm();
      grad_norm_acc += std::sqrt(sq);
      adam.step(params);

      const double w = static_cast<double>(len);
      acc.recon_x += w * bd.recon_x;
      acc.kl_sum += w * bd.kl_sum;
      acc.aux_t += w * bd.aux_t;
      acc.aux_y += w * bd.aux_y;
      acc.reg += w * bd.reg;
      acc.total += w * bd.total;
      used += len;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(used);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean = {acc.recon_x * inv, acc.kl_sum * inv, acc.aux_t * inv,
                acc.aux_y * inv,   acc.reg * inv,    acc.total * inv};
    rec.y_decoder_grad_norm = grad_norm_acc / static_cast<double>(batches);
    result.log.push_back(rec);
  }
  return result;
}

void write_train_log(const std::vector<EpochRecord>& log,
                     const std::filesystem::path& path) {
  std::string out =
      "epoch\trecon_x\tkl_sum\taux_t\taux_y\treg\ttotal\tgrad_norm_y_dec\n";
  for (const EpochRecord& r : log) {
    out += std::to_string(r.epoch);
    for (double v : {r.mean.recon_x, r.mean.kl_sum, r.mean.aux_t, r.mean.aux_y,
                     r.mean.reg, r.mean.total, r.y_decoder_grad_norm}) {
      out.push_back('\t');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

}  // namespace drvae
