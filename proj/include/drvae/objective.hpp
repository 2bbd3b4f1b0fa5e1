#pragma once

#include <utility>

#include "drvae/autodiff.hpp"
#include "drvae/model.hpp"

namespace drvae {

struct LossWeights {
  double alpha = 0.1;
  double beta = 1.0;
  double gamma = 1.0;
  double delta = 0.1;
  double lambda = 1.0;

  void validate() const;
};

// Batch-mean values of every objective term. The training objective is
// maximized; the optimizer minimizes its negation.
struct LossBreakdown {
  double recon_x = 0.0;
  double kl_sum = 0.0;
  double aux_t = 0.0;
  double aux_y = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

struct Batch {
  ad::Matrix x;
  Eigen::VectorXd t;
  Eigen::VectorXd y;
};

// Graph handles for one batch; `total` is the maximized objective
// alpha*recon - beta*kl + gamma*aux_t + delta*aux_y + lambda*reg.
struct ObjectiveTerms {
  ad::Value recon_x, kl_sum, aux_t, aux_y, reg, total;
  LossBreakdown values() const;
};

// Sum of per-column log densities under the covariate decoder output,
// batched per row (n x 1).
ad::Value recon_log_prob(const DrvaeModel& model, const ad::Matrix& x,
                         const XDistribution& dist);

// (recon_x, kl_sum): reconstruction likelihood of the batch under sampled
// factors, and the summed KL of all factor posteriors to N(0, I).
std::pair<ad::Value, ad::Value> elbo_term(const DrvaeModel& model, const Batch& batch,
                                          const FactorPosterior& post,
                                          const FactorSamples& samples);

// (aux_t, aux_y): log likelihood of observed treatments under decode_t and
// of observed outcomes under decode_y. The noise factor is never consulted.
std::pair<ad::Value, ad::Value> auxiliary_term(const DrvaeModel& model,
                                               const Batch& batch,
                                               const FactorSamples& samples);

// Closed-form prior-alignment term: -sum of factor KLs.
ad::Value reg_term(const FactorPosterior& post);

ObjectiveTerms total_objective(const LossWeights& w, const ad::Value& recon_x,
                               const ad::Value& kl_sum, const ad::Value& aux_t,
                               const ad::Value& aux_y, const ad::Value& reg);

// encode -> sample -> all terms for one batch.
ObjectiveTerms build_objective(const DrvaeModel& model, const Batch& batch,
                               const FactorPosterior& post,
                               const FactorSamples& samples, const LossWeights& w);

Batch make_batch(const Dataset& ds, const std::vector<Eigen::Index>& rows);

}  // namespace drvae
