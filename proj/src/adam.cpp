#include "drvae/adam.hpp"

#include <cmath>

namespace drvae {

AdamState::AdamState(std::span<const ad::Value> params, AdamConfig cfg)
    : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const ad::Value& p : params) {
    m_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamState::step(std::span<const ad::Value> params) {
  if (params.size() != m_.size()) {
    throw ContractError("adam_step: parameter count changed (" +
                        std::to_string(params.size()) + " vs " +
                        std::to_string(m_.size()) + ")");
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, step_count_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, step_count_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ad::Value& p = params[i];
    if (p.rows() != m_[i].rows() || p.cols() != m_[i].cols()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) +
                          " shape changed");
    }
    auto g = (p.grad().array() + cfg_.weight_decay * p.data().array()).eval();
    m_[i].array() = cfg_.beta1 * m_[i].array() + (1.0 - cfg_.beta1) * g;
    v_[i].array() = cfg_.beta2 * v_[i].array() + (1.0 - cfg_.beta2) * g.square();
    p.node->data.array() -=
        cfg_.learning_rate * (m_[i].array() / bc1) /
        ((v_[i].array() / bc2).sqrt() + cfg_.epsilon);
  }
}

}  // namespace drvae
