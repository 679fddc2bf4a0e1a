#include "cvsdeblur/optim.hpp"

#include <cmath>
#include <string>

#include "cvsdeblur/errors.hpp"

namespace cvsdeblur::nn {

template <typename T>
AdamW<T>::AdamW(std::vector<TensorT<T>> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (params_.empty()) throw ValidationError("AdamW: no parameters");
  if (!(cfg_.beta1 >= 0 && cfg_.beta1 < 1) || !(cfg_.beta2 >= 0 && cfg_.beta2 < 1)) {
    throw ValidationError("AdamW: betas must lie in [0, 1)");
  }
  if (!(cfg_.eps > 0)) throw ValidationError("AdamW: eps must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    if (!p.defined() || !p.requires_grad()) throw ValidationError("AdamW: every parameter must require grad");
    m_.emplace_back(p.value().size(), T(0));
    v_.emplace_back(p.value().size(), T(0));
  }
}

template <typename T>
void AdamW<T>::step() {
  ++t_;
  const T b1 = static_cast<T>(cfg_.beta1);
  const T b2 = static_cast<T>(cfg_.beta2);
  const T inv_bc1 = T(1) / static_cast<T>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  const T inv_bc2 = T(1) / static_cast<T>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
  const T lr = static_cast<T>(cfg_.lr);
  const T eps = static_cast<T>(cfg_.eps);
  const T wd = static_cast<T>(cfg_.weight_decay);
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].value();
    const auto& g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T mhat = m[j] * inv_bc1;
      const T vhat = v[j] * inv_bc2;
      p[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[j]);
    }
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min) {
  if (total_steps <= 0) throw ValidationError("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) {
    throw ValidationError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                          std::to_string(total_steps) + "]");
  }
  if (lr_max < lr_min) throw ValidationError("cosine_lr: lr_max below lr_min");
  const double phase = M_PI * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

}  // namespace cvsdeblur::nn
