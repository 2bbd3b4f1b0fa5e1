#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "drvae/errors.hpp"

namespace drvae {
class Rng;
}

namespace drvae::ad {

using Matrix = Eigen::MatrixXd;

namespace detail {

// One node of the implicit computation graph. `backprop` reads this node's
// accumulated gradient and adds each input's contribution to its parents.
struct Node {
  Matrix data;
  Matrix grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Node&)> backprop;

  explicit Node(Matrix d)
      : data(std::move(d)), grad(Matrix::Zero(data.rows(), data.cols())) {}
};

}  // namespace detail

// Shallow handle to a graph node. Rows index the batch, columns the features.
// data and grad always share one shape; grad accumulates during backward().
class Value {
 public:
  Value() = default;
  explicit Value(Matrix data)
      : node(std::make_shared<detail::Node>(std::move(data))) {}

  static Value scalar(double v) { return Value(Matrix::Constant(1, 1, v)); }

  bool valid() const { return node != nullptr; }
  Eigen::Index rows() const { return node->data.rows(); }
  Eigen::Index cols() const { return node->data.cols(); }

  const Matrix& data() const { return node->data; }
  Matrix& data() { return node->data; }
  const Matrix& grad() const { return node->grad; }
  Matrix& grad() { return node->grad; }

  void zero_grad() { node->grad.setZero(); }

  // Scalar extraction; ContractError unless the value is 1x1.
  double item() const;

  std::shared_ptr<detail::Node> node;
};

// Affine map parameters: weights (in_dim x out_dim), bias (1 x out_dim).
struct DenseLayer {
  Value weights;
  Value bias;

  Eigen::Index in_dim() const { return weights.rows(); }
  Eigen::Index out_dim() const { return weights.cols(); }
};

// Glorot-uniform weights, zero bias. Weight entries are drawn row-major.
DenseLayer make_dense(Eigen::Index in_dim, Eigen::Index out_dim, Rng& rng);

// Zero-initialized layer (placeholder for checkpoint loading).
DenseLayer make_dense_zero(Eigen::Index in_dim, Eigen::Index out_dim);

// out = input * weights + bias (bias broadcast per row).
Value dense_forward(const DenseLayer& layer, const Value& input);

// Elementwise x if x > 0, alpha*(exp(x)-1) otherwise; derivative at 0 is 1.
Value elu(const Value& x, double alpha = 1.0);

// Elementwise 1/(1+exp(-x)), overflow-safe for the full double range.
Value logistic(const Value& x);

// softplus(x) + 1e-6; the positivity map behind every variance head.
Value softplus_variance(const Value& x);

// Per-row diagonal-Gaussian log density of x; output is (batch x 1).
Value gaussian_log_prob(const Matrix& x, const Value& mean, const Value& variance);

// Per-row Bernoulli log likelihood; p is clamped to [1e-7, 1-1e-7].
Value bernoulli_log_prob(const Matrix& x, const Value& p);

// Per-row KL(N(mean, diag variance) || N(0, I)).
Value kl_std_normal(const Value& mean, const Value& variance);

// mean + sqrt(variance) * noise; gradients flow to mean and variance only.
Value reparam_sample(const Value& mean, const Value& variance, const Matrix& noise);

Value concat_cols(std::span<const Value> parts);
Value add(const Value& a, const Value& b);
Value scale(const Value& a, double c);

// Mean over every entry, reduced to a 1x1 scalar.
Value batch_mean(const Value& a);
Value sum_all(const Value& a);

// sum of coeff*term; zero-coefficient terms are dropped from the graph so a
// disabled term can neither contribute value nor propagate gradient.
Value weighted_sum(std::span<const std::pair<double, Value>> terms);

// Reverse pass from a scalar loss; every reachable node's grad accumulates
// d(loss)/d(node). Caller is responsible for zeroing long-lived grads first.
void backward(const Value& loss);

void zero_grads(std::span<const Value> params);

}  // namespace drvae::ad
