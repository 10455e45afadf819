#include "disfl/optim.hpp"

#include <cmath>

namespace disfl::tc {

template <class T>
Adam<T>::Adam(std::vector<Parameter<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.value().shape());
    v_.emplace_back(p.value().shape());
  }
}

template <class T>
void Adam<T>::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const T b1 = T(config_.beta1), b2 = T(config_.beta2);
  const T lr = T(config_.lr), eps = T(config_.eps);
  const T inv_c1 = T(1.0 / c1), inv_c2 = T(1.0 / c2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const Tensor<T>& g = p.grad();
    Tensor<T>& w = p.mutable_value();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m_[i][j] = b1 * m_[i][j] + (T(1) - b1) * g[j];
      v_[i][j] = b2 * v_[i][j] + (T(1) - b2) * g[j] * g[j];
      const T m_hat = m_[i][j] * inv_c1;
      const T v_hat = v_[i][j] * inv_c2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <class T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace disfl::tc
