#pragma once

#include <span>
#include <vector>

#include "drvae/autodiff.hpp"

namespace drvae {

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with classic L2 coupling: weight_decay * param is added to the
// gradient before the moment updates.
class AdamState {
 public:
  AdamState(std::span<const ad::Value> params, AdamConfig cfg = {});

  // One update over the same parameter list the state was built from.
  void step(std::span<const ad::Value> params);

  int step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<ad::Matrix>& first_moment() const { return m_; }
  const std::vector<ad::Matrix>& second_moment() const { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<ad::Matrix> m_;
  std::vector<ad::Matrix> v_;
  int step_count_ = 0;
};

}  // namespace drvae
