#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drvae/autodiff.hpp"
#include "drvae/dataset.hpp"

namespace drvae {

class Rng;

struct LatentConfig {
  int d_gamma = 1;
  int d_delta = 1;
  int d_upsilon = 1;
  int d_e = 1;
  int hidden_dim = 128;
  int num_layers = 3;

  int total_dim() const { return d_gamma + d_delta + d_upsilon + d_e; }
  void validate() const;
};

struct Posterior {
  ad::Value mean;
  ad::Value variance;
};

// Diagonal-Gaussian posteriors for the instrumental (gamma), confounding
// (delta), adjustment (upsilon) and external-noise (e) factors. Factors
// configured with dimension 0 carry empty (n x 0) blocks.
struct FactorPosterior {
  Posterior gamma, delta, upsilon, e;
};

struct FactorSamples {
  ad::Value gamma, delta, upsilon, e;
};

// Per-column reconstruction parameters: probabilities for binary columns,
// mean/variance pairs for continuous ones.
struct XDistribution {
  ad::Value bin_prob;      // n x (#binary)
  ad::Value con_mean;      // n x (#continuous)
  ad::Value con_variance;  // n x (#continuous)
};

namespace detail_model {

struct MlpTrunk {
  std::vector<ad::DenseLayer> layers;
  ad::Value forward(const ad::Value& in) const;
};

struct GaussianHead {
  MlpTrunk trunk;
  ad::DenseLayer mean_head;
  ad::DenseLayer var_head;
  std::pair<ad::Value, ad::Value> forward(const ad::Value& in) const;
};

}  // namespace detail_model

// Four factor encoders, a mixed Bernoulli/Gaussian covariate decoder, a
// treatment decoder on (gamma, delta) and an outcome decoder on
// (t, delta, upsilon). The external-noise factor reaches only the covariate
// decoder; the exclusions are structural, not penalized.
class DrvaeModel {
 public:
  DrvaeModel(std::vector<ColumnKind> schema, LatentConfig cfg, Rng& init_rng);

  const LatentConfig& latent() const { return cfg_; }
  const std::vector<ColumnKind>& schema() const { return schema_; }
  const std::vector<Eigen::Index>& binary_columns() const { return bin_cols_; }
  const std::vector<Eigen::Index>& continuous_columns() const { return con_cols_; }

  FactorPosterior encode(const ad::Matrix& x) const;
  FactorSamples sample_posterior(const FactorPosterior& post, Rng& rng) const;

  XDistribution decode_x(const ad::Value& z_gamma, const ad::Value& z_delta,
                         const ad::Value& z_upsilon, const ad::Value& z_e) const;
  std::pair<ad::Value, ad::Value> decode_t(const ad::Value& z_gamma,
                                           const ad::Value& z_delta) const;
  std::pair<ad::Value, ad::Value> decode_y(const Eigen::VectorXd& t,
                                           const ad::Value& z_delta,
                                           const ad::Value& z_upsilon) const;

  std::vector<ad::Value> parameters() const;
  std::vector<std::pair<std::string, ad::Value>> named_parameters() const;
  std::vector<ad::Value> outcome_decoder_parameters() const;
  std::vector<ad::Value> covariate_decoder_parameters() const;
  std::vector<ad::Value> noise_encoder_parameters() const;

  bool parameters_finite() const;

  void save(const std::filesystem::path& path) const;
  static DrvaeModel load(const std::filesystem::path& path);

 private:
  struct NoInit {};
  DrvaeModel(std::vector<ColumnKind> schema, LatentConfig cfg, NoInit);
  void build(Rng* rng);

  std::vector<ColumnKind> schema_;
  std::vector<Eigen::Index> bin_cols_;
  std::vector<Eigen::Index> con_cols_;
  LatentConfig cfg_;

  std::optional<detail_model::GaussianHead> enc_gamma_, enc_delta_, enc_upsilon_, enc_e_;
  detail_model::MlpTrunk dec_x_trunk_;
  ad::DenseLayer dec_x_bin_, dec_x_con_mean_, dec_x_con_var_;
  detail_model::GaussianHead dec_t_, dec_y_;
};

}  // namespace drvae
