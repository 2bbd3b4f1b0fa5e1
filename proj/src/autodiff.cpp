#include "drvae/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "drvae/rng.hpp"

namespace drvae::ad {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kVarianceFloor = 1e-6;
constexpr double kBernoulliEps = 1e-7;

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}
std::string shape_str(const Matrix& m) { return shape_str(m.rows(), m.cols()); }

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) +
                         " vs " + shape_str(b));
  }
}

void require_positive(const char* op, const Matrix& variance) {
  if ((variance.array() <= 0.0).any()) {
    throw DomainError(std::string(op) + ": variance must be positive");
  }
}

Value make_value(Matrix data, std::vector<std::shared_ptr<detail::Node>> parents,
                 std::function<void(const detail::Node&)> backprop) {
  Value v{std::move(data)};
  v.node->parents = std::move(parents);
  v.node->backprop = std::move(backprop);
  return v;
}

double stable_sigmoid(double v) {
  if (v >= 0.0) {
    const double e = std::exp(-v);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double stable_softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

}  // namespace

double Value::item() const {
  if (!valid() || rows() != 1 || cols() != 1) {
    throw ContractError("item: expected a 1x1 scalar, got " +
                        (valid() ? shape_str(node->data) : std::string("<empty>")));
  }
  return node->data(0, 0);
}

DenseLayer make_dense(Eigen::Index in_dim, Eigen::Index out_dim, Rng& rng) {
  const double fan_sum = static_cast<double>(in_dim + out_dim);
  const double limit = fan_sum > 0.0 ? std::sqrt(6.0 / fan_sum) : 0.0;
  Matrix w(in_dim, out_dim);
  for (Eigen::Index i = 0; i < in_dim; ++i)
    for (Eigen::Index j = 0; j < out_dim; ++j) w(i, j) = rng.uniform(-limit, limit);
  return DenseLayer{Value(std::move(w)), Value(Matrix::Zero(1, out_dim))};
}

DenseLayer make_dense_zero(Eigen::Index in_dim, Eigen::Index out_dim) {
  return DenseLayer{Value(Matrix::Zero(in_dim, out_dim)),
                    Value(Matrix::Zero(1, out_dim))};
}

Value dense_forward(const DenseLayer& layer, const Value& input) {
  if (input.cols() != layer.weights.rows()) {
    throw DimensionError("dense_forward: input " + shape_str(input.data()) +
                         " incompatible with weights " +
                         shape_str(layer.weights.data()));
  }
  Matrix out = input.data() * layer.weights.data();
  out.rowwise() += layer.bias.data().row(0);
  auto in = input.node;
  auto w = layer.weights.node;
  auto b = layer.bias.node;
  return make_value(std::move(out), {in, w, b},
                    [in, w, b](const detail::Node& n) {
                      in->grad.noalias() += n.grad * w->data.transpose();
                      w->grad.noalias() += in->data.transpose() * n.grad;
                      b->grad.row(0) += n.grad.colwise().sum();
                    });
}

Value elu(const Value& x, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("elu: alpha must be > 0");
  Matrix out = x.data().unaryExpr(
      [alpha](double v) { return v > 0.0 ? v : alpha * std::expm1(v); });
  auto xn = x.node;
  return make_value(std::move(out), {xn}, [xn, alpha](const detail::Node& n) {
    xn->grad.array() += n.grad.array() * xn->data.unaryExpr([alpha](double v) {
                                              if (v > 0.0) return 1.0;
                                              if (v == 0.0) return 1.0;
                                              return alpha * std::exp(v);
                                            }).array();
  });
}

Value logistic(const Value& x) {
  Matrix out = x.data().unaryExpr([](double v) { return stable_sigmoid(v); });
  auto xn = x.node;
  return make_value(std::move(out), {xn}, [xn](const detail::Node& n) {
    xn->grad.array() +=
        n.grad.array() * n.data.array() * (1.0 - n.data.array());
  });
}

Value softplus_variance(const Value& x) {
  Matrix out = x.data().unaryExpr(
      [](double v) { return stable_softplus(v) + kVarianceFloor; });
  auto xn = x.node;
  return make_value(std::move(out), {xn}, [xn](const detail::Node& n) {
    xn->grad.array() +=
        n.grad.array() *
        xn->data.unaryExpr([](double v) { return stable_sigmoid(v); }).array();
  });
}

Value gaussian_log_prob(const Matrix& x, const Value& mean, const Value& variance) {
  require_same_shape("gaussian_log_prob", x, mean.data());
  require_same_shape("gaussian_log_prob", mean.data(), variance.data());
  require_positive("gaussian_log_prob", variance.data());
  const Eigen::Index n = x.rows();
  Matrix out(n, 1);
  if (x.cols() == 0) {
    out.setZero();
    return make_value(std::move(out), {mean.node, variance.node}, nullptr);
  }
  auto diff = (x - mean.data()).eval();
  out.col(0) = (-0.5 * ((variance.data().array().log() + kLogTwoPi) +
                        diff.array().square() / variance.data().array()))
                   .rowwise()
                   .sum();
  auto m = mean.node;
  auto v = variance.node;
  return make_value(std::move(out), {m, v},
                    [m, v, diff](const detail::Node& n_) {
                      const auto g = n_.grad.col(0).array();
                      m->grad.array() +=
                          (diff.array() / v->data.array()).colwise() * g;
                      v->grad.array() +=
                          (0.5 * (diff.array().square() /
                                      v->data.array().square() -
                                  1.0 / v->data.array()))
                              .colwise() *
                          g;
                    });
}

Value bernoulli_log_prob(const Matrix& x, const Value& p) {
  require_same_shape("bernoulli_log_prob", x, p.data());
  if (((x.array() != 0.0) && (x.array() != 1.0)).any()) {
    throw DomainError("bernoulli_log_prob: x entries must be exactly 0 or 1");
  }
  const Eigen::Index n = x.rows();
  Matrix out(n, 1);
  if (x.cols() == 0) {
    out.setZero();
    return make_value(std::move(out), {p.node}, nullptr);
  }
  auto pc = p.data()
                .array()
                .max(kBernoulliEps)
                .min(1.0 - kBernoulliEps)
                .matrix()
                .eval();
  out.col(0) = (x.array() * pc.array().log() +
                (1.0 - x.array()) * (1.0 - pc.array()).log())
                   .rowwise()
                   .sum();
  auto pn = p.node;
  return make_value(std::move(out), {pn}, [pn, x, pc](const detail::Node& n_) {
    const auto g = n_.grad.col(0).array();
    pn->grad.array() +=
        (x.array() / pc.array() - (1.0 - x.array()) / (1.0 - pc.array()))
            .colwise() *
        g;
  });
}

Value kl_std_normal(const Value& mean, const Value& variance) {
  require_same_shape("kl_std_normal", mean.data(), variance.data());
  require_positive("kl_std_normal", variance.data());
  const Eigen::Index n = mean.rows();
  Matrix out(n, 1);
  if (mean.cols() == 0) {
    out.setZero();
    return make_value(std::move(out), {mean.node, variance.node}, nullptr);
  }
  out.col(0) = (0.5 * (mean.data().array().square() + variance.data().array() -
                       variance.data().array().log() - 1.0))
                   .rowwise()
                   .sum();
  auto m = mean.node;
  auto v = variance.node;
  return make_value(std::move(out), {m, v}, [m, v](const detail::Node& n_) {
    const auto g = n_.grad.col(0).array();
    m->grad.array() += m->data.array().colwise() * g;
    v->grad.array() += (0.5 * (1.0 - 1.0 / v->data.array())).colwise() * g;
  });
}

Value reparam_sample(const Value& mean, const Value& variance, const Matrix& noise) {
  require_same_shape("reparam_sample", mean.data(), variance.data());
  require_same_shape("reparam_sample", mean.data(), noise);
  require_positive("reparam_sample", variance.data());
  auto sd = variance.data().array().sqrt().matrix().eval();
  Matrix out = mean.data() + sd.cwiseProduct(noise);
  auto m = mean.node;
  auto v = variance.node;
  return make_value(std::move(out), {m, v},
                    [m, v, noise, sd](const detail::Node& n_) {
                      m->grad += n_.grad;
                      v->grad.array() +=
                          n_.grad.array() * noise.array() / (2.0 * sd.array());
                    });
}

Value concat_cols(std::span<const Value> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const Eigen::Index n = parts.front().rows();
  Eigen::Index total = 0;
  for (const Value& p : parts) {
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(p.data()) +
                           " vs " + std::to_string(n) + " rows");
    }
    total += p.cols();
  }
  Matrix out(n, total);
  std::vector<std::shared_ptr<detail::Node>> parents;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Value& p : parts) {
    out.middleCols(at, p.cols()) = p.data();
    parents.push_back(p.node);
    offsets.push_back(at);
    at += p.cols();
  }
  return make_value(std::move(out), parents,
                    [parents, offsets](const detail::Node& n_) {
                      for (std::size_t i = 0; i < parents.size(); ++i) {
                        auto& parent = parents[i];
                        parent->grad +=
                            n_.grad.middleCols(offsets[i], parent->data.cols());
                      }
                    });
}

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a.data(), b.data());
  auto an = a.node;
  auto bn = b.node;
  return make_value(a.data() + b.data(), {an, bn},
                    [an, bn](const detail::Node& n_) {
                      an->grad += n_.grad;
                      bn->grad += n_.grad;
                    });
}

Value scale(const Value& a, double c) {
  auto an = a.node;
  return make_value(c * a.data(), {an}, [an, c](const detail::Node& n_) {
    an->grad += c * n_.grad;
  });
}

Value batch_mean(const Value& a) {
  if (a.data().size() == 0) throw ContractError("batch_mean: empty input");
  const double inv = 1.0 / static_cast<double>(a.data().size());
  auto an = a.node;
  return make_value(Matrix::Constant(1, 1, a.data().sum() * inv), {an},
                    [an, inv](const detail::Node& n_) {
                      an->grad.array() += n_.grad(0, 0) * inv;
                    });
}

Value sum_all(const Value& a) {
  auto an = a.node;
  return make_value(Matrix::Constant(1, 1, a.data().sum()), {an},
                    [an](const detail::Node& n_) {
                      an->grad.array() += n_.grad(0, 0);
                    });
}

Value weighted_sum(std::span<const std::pair<double, Value>> terms) {
  if (terms.empty()) throw ContractError("weighted_sum: no terms");
  for (const auto& [c, t] : terms) {
    if (t.rows() != 1 || t.cols() != 1) {
      throw ContractError("weighted_sum: terms must be 1x1 scalars");
    }
  }
  double total = 0.0;
  std::vector<std::shared_ptr<detail::Node>> parents;
  std::vector<double> coeffs;
  for (const auto& [c, t] : terms) {
    if (c == 0.0) continue;  // disabled term: no value, no gradient
    total += c * t.data()(0, 0);
    parents.push_back(t.node);
    coeffs.push_back(c);
  }
  return make_value(Matrix::Constant(1, 1, total), parents,
                    [parents, coeffs](const detail::Node& n_) {
                      for (std::size_t i = 0; i < parents.size(); ++i) {
                        parents[i]->grad(0, 0) += coeffs[i] * n_.grad(0, 0);
                      }
                    });
}

void backward(const Value& loss) {
  if (!loss.valid() || loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError(
        "backward: loss must be a 1x1 scalar, got " +
        (loss.valid() ? shape_str(loss.data()) : std::string("<empty>")));
  }
  // Iterative DFS postorder; reversed, it visits every consumer before the
  // nodes it consumes, so each backprop sees a fully accumulated gradient.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  visited.insert(loss.node.get());
  stack.emplace_back(loss.node.get(), 0);
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      detail::Node* parent = top.first->parents[top.second].get();
      ++top.second;
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(top.first);
      stack.pop_back();
    }
  }
  loss.node->grad(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
}

void zero_grads(std::span<const Value> params) {
  for (const Value& p : params) p.node->grad.setZero();
}

}  // namespace drvae::ad
