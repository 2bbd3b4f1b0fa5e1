#include <doctest.h>

#include <cmath>

#include "drvae/adam.hpp"
#include "drvae/datagen.hpp"
#include "drvae/objective.hpp"
#include "drvae/rng.hpp"

using namespace drvae;
using ad::Matrix;
using ad::Value;

namespace {

constexpr double kHalfLogTwoPi = 0.9189385332046727418;

DrvaeModel simu_model(std::uint64_t seed, int hidden = 16, int layers = 2) {
  Dataset ds = gen_simu({1, 20, 10, seed});
  LatentConfig cfg;
  cfg.hidden_dim = hidden;
  cfg.num_layers = layers;
  Rng rng(seed, 1);
  return DrvaeModel(ds.column_kind, cfg, rng);
}

struct Setup {
  Dataset ds;
  DrvaeModel model;
  Batch batch;
  FactorPosterior post;
  FactorSamples samples;
};

Setup make_setup(std::uint64_t seed, int rows = 16) {
  Dataset ds = gen_simu({1, 100, 30, seed});
  LatentConfig cfg;
  cfg.hidden_dim = 16;
  cfg.num_layers = 2;
  Rng init(seed, 1);
  DrvaeModel model(ds.column_kind, cfg, init);
  std::vector<Eigen::Index> rows_idx;
  for (int i = 0; i < rows; ++i) rows_idx.push_back(i);
  Batch batch = make_batch(ds, rows_idx);
  Rng sample_rng(seed, 2);
  FactorPosterior post = model.encode(batch.x);
  FactorSamples samples = model.sample_posterior(post, sample_rng);
  return {std::move(ds), std::move(model), std::move(batch), std::move(post),
          std::move(samples)};
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("recon log prob hits the Gaussian density ceiling at perfect fit") {
  // ideal decoder output: binary p == label, continuous mean == value, var 1
  Setup s = make_setup(1);
  const auto& bin_cols = s.model.binary_columns();
  const auto& con_cols = s.model.continuous_columns();
  const Eigen::Index n = s.batch.x.rows();
  Matrix bin(n, static_cast<Eigen::Index>(bin_cols.size()));
  Matrix con(n, static_cast<Eigen::Index>(con_cols.size()));
  for (Eigen::Index j = 0; j < bin.cols(); ++j) {
    bin.col(j) = s.batch.x.col(bin_cols[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index j = 0; j < con.cols(); ++j) {
    con.col(j) = s.batch.x.col(con_cols[static_cast<std::size_t>(j)]);
  }
  XDistribution ideal;
  ideal.bin_prob = Value(bin);  // clamped internally to [eps, 1-eps]
  ideal.con_mean = Value(con);
  ideal.con_variance = Value(Matrix::Ones(n, con.cols()));
  const double recon = ad::batch_mean(recon_log_prob(s.model, s.batch.x, ideal)).item();
  CHECK(recon == doctest::Approx(-kHalfLogTwoPi * 11.0).epsilon(1e-5));
}

TEST_CASE("standard-normal posteriors zero the KL and the reg term") {
  const Eigen::Index n = 6;
  FactorPosterior post;
  for (Posterior* q : {&post.gamma, &post.delta, &post.upsilon, &post.e}) {
    q->mean = Value(Matrix::Zero(n, 2));
    q->variance = Value(Matrix::Ones(n, 2));
  }
  CHECK(reg_term(post).item() == 0.0);
  // non-standard posteriors: reg == -kl and reg <= 0
  post.delta.mean = Value(Matrix::Constant(n, 2, 0.7));
  post.delta.variance = Value(Matrix::Constant(n, 2, 2.3));
  const double reg = reg_term(post).item();
  CHECK(reg < 0.0);
  CHECK(reg == doctest::Approx(-ad::batch_mean(ad::kl_std_normal(
                                    post.delta.mean, post.delta.variance))
                                    .item()));
}

TEST_CASE("elbo and auxiliary terms are finite and kl is nonnegative") {
  Setup s = make_setup(2);
  auto [recon, kl] = elbo_term(s.model, s.batch, s.post, s.samples);
  CHECK(std::isfinite(recon.item()));
  CHECK(kl.item() >= 0.0);
  auto [aux_t, aux_y] = auxiliary_term(s.model, s.batch, s.samples);
  CHECK(std::isfinite(aux_t.item()));
  CHECK(std::isfinite(aux_y.item()));
}

TEST_CASE("worse outcome means strictly lower aux likelihood") {
  const Eigen::Index n = 8;
  Matrix y = Matrix::Zero(n, 1);
  Value var(Matrix::Ones(n, 1));
  const double close = ad::batch_mean(
      ad::gaussian_log_prob(y, Value(Matrix::Constant(n, 1, 0.2)), var)).item();
  const double far = ad::batch_mean(
      ad::gaussian_log_prob(y, Value(Matrix::Constant(n, 1, 1.2)), var)).item();
  CHECK(far < close);
  // density at the mean with unit variance
  const double at_mean =
      ad::batch_mean(ad::gaussian_log_prob(y, Value(Matrix::Zero(n, 1)), var)).item();
  CHECK(at_mean == doctest::Approx(-kHalfLogTwoPi));
}

TEST_CASE("aux_y never touches the noise encoder") {
  Setup s = make_setup(3);
  auto [aux_t, aux_y] = auxiliary_term(s.model, s.batch, s.samples);
  auto params = s.model.parameters();
  ad::zero_grads(params);
  ad::backward(aux_y);
  for (const Value& p : s.model.noise_encoder_parameters()) {
    CHECK(same(p.grad(), Matrix::Zero(p.rows(), p.cols())));
  }
}

TEST_CASE("all-zero weights produce zero total and zero gradients") {
  Setup s = make_setup(4);
  LossWeights w{0, 0, 0, 0, 0};
  ObjectiveTerms terms = build_objective(s.model, s.batch, s.post, s.samples, w);
  CHECK(terms.total.item() == 0.0);
  auto params = s.model.parameters();
  ad::zero_grads(params);
  ad::backward(terms.total);
  for (const Value& p : params) {
    CHECK(same(p.grad(), Matrix::Zero(p.rows(), p.cols())));
  }
}

TEST_CASE("delta weight zero silences the outcome decoder gradients") {
  Setup s = make_setup(5);
  LossWeights w;
  w.delta = 0.0;
  ObjectiveTerms terms = build_objective(s.model, s.batch, s.post, s.samples, w);
  auto params = s.model.parameters();
  ad::zero_grads(params);
  ad::backward(terms.total);
  for (const Value& p : s.model.outcome_decoder_parameters()) {
    CHECK(same(p.grad(), Matrix::Zero(p.rows(), p.cols())));
  }
}

TEST_CASE("doubling alpha doubles the covariate-decoder gradients") {
  Setup s = make_setup(6);
  auto params = s.model.parameters();

  LossWeights w1;
  w1.alpha = 0.1;
  ObjectiveTerms t1 = build_objective(s.model, s.batch, s.post, s.samples, w1);
  ad::zero_grads(params);
  ad::backward(t1.total);
  std::vector<Matrix> g1;
  for (const Value& p : s.model.covariate_decoder_parameters()) g1.push_back(p.grad());

  // rebuild with the same posterior/samples so only alpha changes
  LossWeights w2;
  w2.alpha = 0.2;
  ObjectiveTerms t2 = build_objective(s.model, s.batch, s.post, s.samples, w2);
  ad::zero_grads(params);
  ad::backward(t2.total);
  auto dec = s.model.covariate_decoder_parameters();
  for (std::size_t i = 0; i < dec.size(); ++i) {
    CHECK(((2.0 * g1[i] - dec[i].grad()).array().abs() <
           1e-12 * (1.0 + dec[i].grad().array().abs()))
              .all());
  }
}

TEST_CASE("total is the stated affine combination of its terms") {
  Setup s = make_setup(7);
  Rng wrng(99);
  for (int trial = 0; trial < 10; ++trial) {
    LossWeights w{wrng.uniform(0, 2), wrng.uniform(0, 2), wrng.uniform(0, 2),
                  wrng.uniform(0, 2), wrng.uniform(0, 2)};
    ObjectiveTerms terms = build_objective(s.model, s.batch, s.post, s.samples, w);
    const LossBreakdown bd = terms.values();
    const double expected = w.alpha * bd.recon_x - w.beta * bd.kl_sum +
                            w.gamma * bd.aux_t + w.delta * bd.aux_y +
                            w.lambda * bd.reg;
    CHECK(bd.total == doctest::Approx(expected).epsilon(1e-12));
    CHECK(bd.reg == doctest::Approx(-bd.kl_sum).epsilon(1e-12));
  }
}

TEST_CASE("negative weights are rejected") {
  LossWeights w;
  w.beta = -0.1;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("closed-form KL matches monte carlo over reparameterized draws") {
  const Eigen::Index n = 4;
  Matrix mean = (Matrix(n, 1) << 0.8, -0.5, 1.2, 0.3).finished();
  Matrix var = (Matrix(n, 1) << 0.5, 1.7, 0.9, 2.2).finished();
  Value mean_v(mean), var_v(var);
  const double closed =
      ad::batch_mean(ad::kl_std_normal(mean_v, var_v)).item() * n;  // row sum

  Rng rng(17);
  const int draws = 100000;
  double acc = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Matrix noise = rng.normal_matrix(n, 1);
    const Matrix z = mean + var.cwiseSqrt().cwiseProduct(noise);
    const double log_q =
        ad::gaussian_log_prob(z, mean_v, var_v).data().sum();
    const double log_p =
        ad::gaussian_log_prob(z, Value(Matrix::Zero(n, 1)), Value(Matrix::Ones(n, 1)))
            .data()
            .sum();
    acc += log_q - log_p;
  }
  const double mc = acc / draws;
  CHECK(mc == doctest::Approx(closed).epsilon(0.01));
}

TEST_CASE("ascent: 200 adam steps lift the smoothed objective on a fixed batch") {
  Dataset ds = gen_simu({1, 500, 200, 21});
  LatentConfig cfg;  // defaults: dims 1, hidden 128, layers 3
  Rng init(21, 1);
  DrvaeModel model(ds.column_kind, cfg, init);
  std::vector<Eigen::Index> rows;
  for (int i = 0; i < 64; ++i) rows.push_back(i);
  Batch batch = make_batch(ds, rows);

  LossWeights w{0.1, 1.0, 1.0, 0.1, 1.0};
  auto params = model.parameters();
  AdamState adam(params, AdamConfig{1e-3, 1e-4});
  Rng step_rng(21, 2);
  std::vector<double> history;
  for (int step = 0; step < 200; ++step) {
    FactorPosterior post = model.encode(batch.x);
    FactorSamples samples = model.sample_posterior(post, step_rng);
    ObjectiveTerms terms = build_objective(model, batch, post, samples, w);
    history.push_back(terms.total.item());
    ad::zero_grads(params);
    ad::backward(ad::scale(terms.total, -1.0));
    adam.step(params);
  }
  std::vector<double> smoothed;
  for (std::size_t i = 0; i + 10 <= history.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < i + 10; ++j) s += history[j];
    smoothed.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < smoothed.size(); ++i) {
    REQUIRE(smoothed[i] > smoothed[i - 1]);
  }
}
