#pragma once

#include <cstdint>
#include <vector>

#include "cvsdeblur/tensor.hpp"

namespace cvsdeblur::nn {

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled, applied as lr * wd * p
};

// AdamW with bias-corrected moments and decoupled weight decay. Moment
// buffers live in the parameter dtype so a checkpointed state restores
// bit-exactly.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<TensorT<T>> params, AdamWConfig cfg);

  // Applies one update from the grads currently stored on the parameters.
  void step();
  void zero_grad();

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  const AdamWConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return t_; }

  const std::vector<TensorT<T>>& params() const { return params_; }

  // Moment access for checkpoint/resume; index order matches params().
  std::vector<T>& moment1(size_t i) { return m_[i]; }
  std::vector<T>& moment2(size_t i) { return v_[i]; }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  std::vector<TensorT<T>> params_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

// Cosine decay from lr_max at step 0 to lr_min at step total_steps.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min);

}  // namespace cvsdeblur::nn
