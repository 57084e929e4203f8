#include "regram/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace regram::ad {

void Adam::step(const std::vector<Tensor*>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->size(), 0.0);
      v_[i].assign(params[i]->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("Adam::step: parameter list size changed between steps");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (p.grad.size() != p.data.size()) {
      throw std::invalid_argument("Adam::step: parameter " + std::to_string(i) +
                                  " has no gradient buffer");
    }
    if (m_[i].size() != p.data.size()) {
      throw std::invalid_argument("Adam::step: parameter " + std::to_string(i) + " changed shape");
    }
    for (size_t j = 0; j < p.data.size(); ++j) {
      const double g = p.grad[j];
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g;
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m_[i][j] / bc1;
      const double v_hat = v_[i][j] / bc2;
      p.data[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace regram::ad
