#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "drvae/autodiff.hpp"

namespace drvae::testing {

// Central-difference oracle for d(loss)/d(params). `loss_fn` must rebuild the
// graph from the current parameter data and return the scalar loss value.
// Comparison uses |analytic - fd| / max(|analytic|, |fd|, floor).
struct GradCheckResult {
  double max_rel_err = 0.0;
  bool ok = true;
};

inline GradCheckResult check_gradients(std::span<const ad::Value> params,
                                       const std::function<double()>& loss_fn,
                                       const std::function<ad::Value()>& graph_fn,
                                       double h = 1e-5, double tol = 1e-4,
                                       double floor = 1e-6) {
  ad::zero_grads(params);
  ad::Value loss = graph_fn();
  ad::backward(loss);
  std::vector<ad::Matrix> analytic;
  analytic.reserve(params.size());
  for (const ad::Value& p : params) analytic.push_back(p.grad());

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Matrix& data = params[k].node->data;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double saved = data(i, j);
        data(i, j) = saved + h;
        const double up = loss_fn();
        data(i, j) = saved - h;
        const double down = loss_fn();
        data(i, j) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = analytic[k](i, j);
        const double rel =
            std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor});
        result.max_rel_err = std::max(result.max_rel_err, rel);
        if (rel >= tol) result.ok = false;
      }
    }
  }
  return result;
}

}  // namespace drvae::testing
