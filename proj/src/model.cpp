#include "drvae/model.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "drvae/rng.hpp"
#include "drvae/textio.hpp"

namespace drvae {

namespace detail_model {

ad::Value MlpTrunk::forward(const ad::Value& in) const {
  ad::Value h = in;
  for (const ad::DenseLayer& layer : layers) {
    h = ad::elu(ad::dense_forward(layer, h));
  }
  return h;
}

std::pair<ad::Value, ad::Value> GaussianHead::forward(const ad::Value& in) const {
  const ad::Value h = trunk.forward(in);
  return {ad::dense_forward(mean_head, h),
          ad::softplus_variance(ad::dense_forward(var_head, h))};
}

}  // namespace detail_model

using detail_model::GaussianHead;
using detail_model::MlpTrunk;

namespace {

MlpTrunk make_trunk(Eigen::Index in_dim, int hidden, int layers, Rng* rng) {
  MlpTrunk trunk;
  Eigen::Index d = in_dim;
  for (int i = 0; i < layers; ++i) {
    trunk.layers.push_back(rng ? ad::make_dense(d, hidden, *rng)
                               : ad::make_dense_zero(d, hidden));
    d = hidden;
  }
  return trunk;
}

GaussianHead make_gaussian_head(Eigen::Index in_dim, int hidden, int layers,
                                Eigen::Index out_dim, Rng* rng) {
  GaussianHead head;
  head.trunk = make_trunk(in_dim, hidden, layers, rng);
  head.mean_head = rng ? ad::make_dense(hidden, out_dim, *rng)
                       : ad::make_dense_zero(hidden, out_dim);
  head.var_head = rng ? ad::make_dense(hidden, out_dim, *rng)
                      : ad::make_dense_zero(hidden, out_dim);
  return head;
}

ad::Value empty_block(Eigen::Index n) { return ad::Value(ad::Matrix(n, 0)); }

void require_factor_width(const char* where, const ad::Value& z, int want) {
  if (z.cols() != want) {
    throw DimensionError(std::string(where) + ": factor block has " +
                         std::to_string(z.cols()) + " columns, expected " +
                         std::to_string(want));
  }
}

void collect_layer(const ad::DenseLayer& l, const std::string& name,
                   std::vector<std::pair<std::string, ad::Value>>& out) {
  out.emplace_back(name + ".w", l.weights);
  out.emplace_back(name + ".b", l.bias);
}

void collect_trunk(const MlpTrunk& t, const std::string& name,
                   std::vector<std::pair<std::string, ad::Value>>& out) {
  for (std::size_t i = 0; i < t.layers.size(); ++i) {
    collect_layer(t.layers[i], name + ".l" + std::to_string(i), out);
  }
}

void collect_head(const GaussianHead& h, const std::string& name,
                  std::vector<std::pair<std::string, ad::Value>>& out) {
  collect_trunk(h.trunk, name, out);
  collect_layer(h.mean_head, name + ".mean", out);
  collect_layer(h.var_head, name + ".var", out);
}

}  // namespace

void LatentConfig::validate() const {
  if (d_gamma < 0 || d_delta < 0 || d_upsilon < 0 || d_e < 0) {
    throw ConfigError("latent dimensions must be >= 0");
  }
  if (total_dim() == 0) {
    throw ConfigError("at least one latent factor must have dimension > 0");
  }
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
}

DrvaeModel::DrvaeModel(std::vector<ColumnKind> schema, LatentConfig cfg, Rng& rng)
    : DrvaeModel(std::move(schema), cfg, NoInit{}) {
  build(&rng);
}

DrvaeModel::DrvaeModel(std::vector<ColumnKind> schema, LatentConfig cfg, NoInit)
    : schema_(std::move(schema)), cfg_(cfg) {
  cfg_.validate();
  if (schema_.empty()) throw ConfigError("model: empty column schema");
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(schema_.size()); ++j) {
    (schema_[static_cast<std::size_t>(j)] == ColumnKind::Binary ? bin_cols_
                                                                : con_cols_)
        .push_back(j);
  }
}

void DrvaeModel::build(Rng* rng) {
  const auto p = static_cast<Eigen::Index>(schema_.size());
  const int hd = cfg_.hidden_dim;
  const int nl = cfg_.num_layers;
  // Construction order is fixed so that a seed pins every initial weight.
  if (cfg_.d_gamma > 0) enc_gamma_ = make_gaussian_head(p, hd, nl, cfg_.d_gamma, rng);
  if (cfg_.d_delta > 0) enc_delta_ = make_gaussian_head(p, hd, nl, cfg_.d_delta, rng);
  if (cfg_.d_upsilon > 0)
    enc_upsilon_ = make_gaussian_head(p, hd, nl, cfg_.d_upsilon, rng);
  if (cfg_.d_e > 0) enc_e_ = make_gaussian_head(p, hd, nl, cfg_.d_e, rng);

  dec_x_trunk_ = make_trunk(cfg_.total_dim(), hd, nl, rng);
  const auto n_bin = static_cast<Eigen::Index>(bin_cols_.size());
  const auto n_con = static_cast<Eigen::Index>(con_cols_.size());
  dec_x_bin_ = rng ? ad::make_dense(hd, n_bin, *rng) : ad::make_dense_zero(hd, n_bin);
  dec_x_con_mean_ =
      rng ? ad::make_dense(hd, n_con, *rng) : ad::make_dense_zero(hd, n_con);
  dec_x_con_var_ =
      rng ? ad::make_dense(hd, n_con, *rng) : ad::make_dense_zero(hd, n_con);

  dec_t_ = make_gaussian_head(cfg_.d_gamma + cfg_.d_delta, hd, nl, 1, rng);
  dec_y_ = make_gaussian_head(1 + cfg_.d_delta + cfg_.d_upsilon, hd, nl, 1, rng);
}

FactorPosterior DrvaeModel::encode(const ad::Matrix& x) const {
  if (x.cols() != static_cast<Eigen::Index>(schema_.size())) {
    throw DimensionError("encode: input has " + std::to_string(x.cols()) +
                         " columns, model schema has " +
                         std::to_string(schema_.size()));
  }
  const ad::Value input(x);
  auto run = [&](const std::optional<GaussianHead>& enc) -> Posterior {
    if (!enc) return {empty_block(x.rows()), empty_block(x.rows())};
    auto [mean, var] = enc->forward(input);
    return {mean, var};
  };
  return {run(enc_gamma_), run(enc_delta_), run(enc_upsilon_), run(enc_e_)};
}

FactorSamples DrvaeModel::sample_posterior(const FactorPosterior& post,
                                           Rng& rng) const {
  auto draw = [&rng](const Posterior& q) -> ad::Value {
    if (q.mean.cols() == 0) return ad::Value(ad::Matrix(q.mean.rows(), 0));
    return ad::reparam_sample(q.mean, q.variance,
                              rng.normal_matrix(q.mean.rows(), q.mean.cols()));
  };
  FactorSamples s;
  s.gamma = draw(post.gamma);
  s.delta = draw(post.delta);
  s.upsilon = draw(post.upsilon);
  s.e = draw(post.e);
  return s;
}

XDistribution DrvaeModel::decode_x(const ad::Value& z_gamma, const ad::Value& z_delta,
                                   const ad::Value& z_upsilon,
                                   const ad::Value& z_e) const {
  require_factor_width("decode_x", z_gamma, cfg_.d_gamma);
  require_factor_width("decode_x", z_delta, cfg_.d_delta);
  require_factor_width("decode_x", z_upsilon, cfg_.d_upsilon);
  require_factor_width("decode_x", z_e, cfg_.d_e);
  const std::array<ad::Value, 4> parts{z_gamma, z_delta, z_upsilon, z_e};
  const ad::Value h = dec_x_trunk_.forward(ad::concat_cols(parts));
  XDistribution out;
  out.bin_prob = ad::logistic(ad::dense_forward(dec_x_bin_, h));
  out.con_mean = ad::dense_forward(dec_x_con_mean_, h);
  out.con_variance = ad::softplus_variance(ad::dense_forward(dec_x_con_var_, h));
  return out;
}

std::pair<ad::Value, ad::Value> DrvaeModel::decode_t(const ad::Value& z_gamma,
                                                     const ad::Value& z_delta) const {
  require_factor_width("decode_t", z_gamma, cfg_.d_gamma);
  require_factor_width("decode_t", z_delta, cfg_.d_delta);
  const std::array<ad::Value, 2> parts{z_gamma, z_delta};
  return dec_t_.forward(ad::concat_cols(parts));
}

std::pair<ad::Value, ad::Value> DrvaeModel::decode_y(const Eigen::VectorXd& t,
                                                     const ad::Value& z_delta,
                                                     const ad::Value& z_upsilon) const {
  require_factor_width("decode_y", z_delta, cfg_.d_delta);
  require_factor_width("decode_y", z_upsilon, cfg_.d_upsilon);
  if (t.size() != z_delta.rows()) {
    throw DimensionError("decode_y: " + std::to_string(t.size()) +
                         " doses for a batch of " + std::to_string(z_delta.rows()));
  }
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t(i) >= 0.0 && t(i) <= 1.0)) {
      throw DomainError("decode_y: treatment " + format_double(t(i)) +
                        " outside [0,1]");
    }
  }
  const ad::Value t_col{ad::Matrix(t)};
  const std::array<ad::Value, 3> parts{t_col, z_delta, z_upsilon};
  return dec_y_.forward(ad::concat_cols(parts));
}

std::vector<std::pair<std::string, ad::Value>> DrvaeModel::named_parameters() const {
  std::vector<std::pair<std::string, ad::Value>> out;
  if (enc_gamma_) collect_head(*enc_gamma_, "enc_gamma", out);
  if (enc_delta_) collect_head(*enc_delta_, "enc_delta", out);
  if (enc_upsilon_) collect_head(*enc_upsilon_, "enc_upsilon", out);
  if (enc_e_) collect_head(*enc_e_, "enc_e", out);
  collect_trunk(dec_x_trunk_, "dec_x", out);
  collect_layer(dec_x_bin_, "dec_x.bin", out);
  collect_layer(dec_x_con_mean_, "dec_x.con_mean", out);
  collect_layer(dec_x_con_var_, "dec_x.con_var", out);
  collect_head(dec_t_, "dec_t", out);
  collect_head(dec_y_, "dec_y", out);
  return out;
}

std::vector<ad::Value> DrvaeModel::parameters() const {
  std::vector<ad::Value> out;
  for (auto& [name, v] : named_parameters()) out.push_back(v);
  return out;
}

std::vector<ad::Value> DrvaeModel::outcome_decoder_parameters() const {
  std::vector<std::pair<std::string, ad::Value>> named;
  collect_head(dec_y_, "dec_y", named);
  std::vector<ad::Value> out;
  for (auto& [name, v] : named) out.push_back(v);
  return out;
}

std::vector<ad::Value> DrvaeModel::covariate_decoder_parameters() const {
  std::vector<std::pair<std::string, ad::Value>> named;
  collect_trunk(dec_x_trunk_, "dec_x", named);
  collect_layer(dec_x_bin_, "dec_x.bin", named);
  collect_layer(dec_x_con_mean_, "dec_x.con_mean", named);
  collect_layer(dec_x_con_var_, "dec_x.con_var", named);
  std::vector<ad::Value> out;
  for (auto& [name, v] : named) out.push_back(v);
  return out;
}

std::vector<ad::Value> DrvaeModel::noise_encoder_parameters() const {
  std::vector<std::pair<std::string, ad::Value>> named;
  if (enc_e_) collect_head(*enc_e_, "enc_e", named);
  std::vector<ad::Value> out;
  for (auto& [name, v] : named) out.push_back(v);
  return out;
}

bool DrvaeModel::parameters_finite() const {
  for (const ad::Value& p : parameters()) {
    if (!p.data().allFinite()) return false;
  }
  return true;
}

void DrvaeModel::save(const std::filesystem::path& path) const {
  std::string out;
  out += "drvae-checkpoint 1\n";
  out += "schema " + column_kind_string(schema_) + "\n";
  out += "latent " + std::to_string(cfg_.d_gamma) + " " + std::to_string(cfg_.d_delta) +
         " " + std::to_string(cfg_.d_upsilon) + " " + std::to_string(cfg_.d_e) + "\n";
  out += "hidden " + std::to_string(cfg_.hidden_dim) + "\n";
  out += "layers " + std::to_string(cfg_.num_layers) + "\n";
  const auto named = named_parameters();
  out += "tensors " + std::to_string(named.size()) + "\n";
  for (const auto& [name, v] : named) {
    out += "tensor " + name + " " + std::to_string(v.rows()) + " " +
           std::to_string(v.cols()) + "\n";
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        if (j) out.push_back(' ');
        out += format_double(v.data()(i, j));
      }
      out.push_back('\n');
    }
  }
  out += "end\n";
  write_file_atomic(path, out);
}

DrvaeModel DrvaeModel::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string tok;
  int version = 0;
  in >> tok >> version;
  if (tok != "drvae-checkpoint" || version != 1) {
    throw IngestionError(path.string() + ": not a version-1 checkpoint");
  }
  std::string schema_str;
  in >> tok >> schema_str;
  if (tok != "schema") throw IngestionError(path.string() + ": missing schema");
  LatentConfig cfg;
  in >> tok >> cfg.d_gamma >> cfg.d_delta >> cfg.d_upsilon >> cfg.d_e;
  if (tok != "latent") throw IngestionError(path.string() + ": missing latent dims");
  in >> tok >> cfg.hidden_dim;
  if (tok != "hidden") throw IngestionError(path.string() + ": missing hidden dim");
  in >> tok >> cfg.num_layers;
  if (tok != "layers") throw IngestionError(path.string() + ": missing layer count");

  DrvaeModel model(parse_column_kind_string(schema_str), cfg, NoInit{});
  model.build(nullptr);

  std::size_t count = 0;
  in >> tok >> count;
  if (tok != "tensors") throw IngestionError(path.string() + ": missing tensor count");
  auto named = model.named_parameters();
  if (count != named.size()) {
    throw IngestionError(path.string() + ": checkpoint holds " +
                         std::to_string(count) + " tensors, model expects " +
                         std::to_string(named.size()));
  }
  for (auto& [name, v] : named) {
    std::string tensor_name;
    Eigen::Index rows = 0, cols = 0;
    in >> tok >> tensor_name >> rows >> cols;
    if (!in || tok != "tensor" || tensor_name != name) {
      throw IngestionError(path.string() + ": expected tensor '" + name + "', found '" +
                           tensor_name + "'");
    }
    if (rows != v.rows() || cols != v.cols()) {
      throw IngestionError(path.string() + ": tensor '" + name + "' is " +
                           std::to_string(rows) + "x" + std::to_string(cols) +
                           ", expected " + std::to_string(v.rows()) + "x" +
                           std::to_string(v.cols()));
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        std::string num;
        if (!(in >> num)) {
          throw IngestionError(path.string() + ": tensor '" + name + "' truncated");
        }
        v.data()(i, j) = parse_double(num, path.string() + " tensor " + name);
      }
    }
  }
  in >> tok;
  if (tok != "end") throw IngestionError(path.string() + ": missing end marker");
  return model;
}

}  // namespace drvae
