#include "drvae/objective.hpp"

#include <array>

namespace drvae {

namespace {

ad::Matrix select_columns(const ad::Matrix& x, const std::vector<Eigen::Index>& cols) {
  ad::Matrix out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out.col(j) = x.col(cols[static_cast<std::size_t>(j)]);
  }
  return out;
}

ad::Value factor_kl(const FactorPosterior& post) {
  ad::Value total;
  const std::array<const Posterior*, 4> factors{&post.gamma, &post.delta,
                                                &post.upsilon, &post.e};
  for (const Posterior* q : factors) {
    ad::Value term = ad::kl_std_normal(q->mean, q->variance);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

}  // namespace

void LossWeights::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0 || delta < 0 || lambda < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
}

LossBreakdown ObjectiveTerms::values() const {
  return {recon_x.item(), kl_sum.item(), aux_t.item(),
          aux_y.item(),   reg.item(),    total.item()};
}

ad::Value recon_log_prob(const DrvaeModel& model, const ad::Matrix& x,
                         const XDistribution& dist) {
  const ad::Matrix x_bin = select_columns(x, model.binary_columns());
  const ad::Matrix x_con = select_columns(x, model.continuous_columns());
  return ad::add(ad::bernoulli_log_prob(x_bin, dist.bin_prob),
                 ad::gaussian_log_prob(x_con, dist.con_mean, dist.con_variance));
}

std::pair<ad::Value, ad::Value> elbo_term(const DrvaeModel& model, const Batch& batch,
                                          const FactorPosterior& post,
                                          const FactorSamples& samples) {
  const XDistribution dist =
      model.decode_x(samples.gamma, samples.delta, samples.upsilon, samples.e);
  ad::Value recon = ad::batch_mean(recon_log_prob(model, batch.x, dist));
  ad::Value kl = ad::batch_mean(factor_kl(post));
  return {recon, kl};
}

std::pair<ad::Value, ad::Value> auxiliary_term(const DrvaeModel& model,
                                               const Batch& batch,
                                               const FactorSamples& samples) {
  auto [t_mean, t_var] = model.decode_t(samples.gamma, samples.delta);
  ad::Value aux_t =
      ad::batch_mean(ad::gaussian_log_prob(ad::Matrix(batch.t), t_mean, t_var));
  auto [y_mean, y_var] = model.decode_y(batch.t, samples.delta, samples.upsilon);
  ad::Value aux_y =
      ad::batch_mean(ad::gaussian_log_prob(ad::Matrix(batch.y), y_mean, y_var));
  return {aux_t, aux_y};
}

ad::Value reg_term(const FactorPosterior& post) {
  return ad::scale(ad::batch_mean(factor_kl(post)), -1.0);
}

ObjectiveTerms total_objective(const LossWeights& w, const ad::Value& recon_x,
                               const ad::Value& kl_sum, const ad::Value& aux_t,
                               const ad::Value& aux_y, const ad::Value& reg) {
  w.validate();
  ObjectiveTerms terms;
  terms.recon_x = recon_x;
  terms.kl_sum = kl_sum;
  terms.aux_t = aux_t;
  terms.aux_y = aux_y;
  terms.reg = reg;
  const std::array<std::pair<double, ad::Value>, 5> weighted{
      std::pair{w.alpha, recon_x}, std::pair{-w.beta, kl_sum},
      std::pair{w.gamma, aux_t}, std::pair{w.delta, aux_y},
      std::pair{w.lambda, reg}};
  terms.total = ad::weighted_sum(weighted);
  return terms;
}

ObjectiveTerms build_objective(const DrvaeModel& model, const Batch& batch,
                               const FactorPosterior& post,
                               const FactorSamples& samples, const LossWeights& w) {
  auto [recon, kl] = elbo_term(model, batch, post, samples);
  auto [aux_t, aux_y] = auxiliary_term(model, batch, samples);
  // Same posteriors as the ELBO KL, negated in closed form.
  ad::Value reg = ad::scale(kl, -1.0);
  return total_objective(w, recon, kl, aux_t, aux_y, reg);
}

Batch make_batch(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.x.resize(n, ds.p());
  b.t.resize(n);
  b.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = rows[static_cast<std::size_t>(i)];
    b.x.row(i) = ds.x.row(r);
    b.t(i) = ds.t(r);
    b.y(i) = ds.y(r);
  }
  return b;
}

}  // namespace drvae
