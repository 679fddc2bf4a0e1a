#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cvsdeblur/checkpoint.hpp"
#include "cvsdeblur/sensor.hpp"
#include "cvsdeblur/stgdnet.hpp"
#include "cvsdeblur/tensor.hpp"

namespace cvsdeblur {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 4;
  double lr_max = 2e-4;
  double lr_min = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
  double lambda_psnr = 0.5;
  double loss_eps = 1e-8;
  bool td_tail_augment = false;
  std::uint64_t seed = 0;
};

// Training unit: the sample plus optional post-exposure differences that the
// tail augmentation can fold in.
struct TrainSample {
  CVSSample sample;
  std::vector<QuantFrame> extra_tds;
};

struct StepRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<StepRecord> history;
  std::int64_t total_steps = 0;
};

// Everything needed to continue a run exactly where it stopped: optimizer
// moments, the position in the schedule and the RNG text state.
struct TrainState {
  int completed_epochs = 0;
  std::int64_t next_step = 0;
  std::string rng_state;
  std::vector<NamedTensor> opt_state;
};

// Negative-PSNR objective: lambda * 10 * log10(mse(pred, target) + eps),
// which is -lambda * psnr for mse >> eps. Perfect reconstruction gives
// lambda * 10 * log10(eps).
template <typename T>
nn::TensorT<T> psnr_loss(const nn::TensorT<T>& pred, const nn::TensorT<T>& target, T lambda, T eps);

double psnr_loss_value(const Frame& pred, const Frame& target, double lambda = 0.5, double eps = 1e-8);

// Runs the training loop on the model in place.
//
// Batches group samples of equal N; batch composition and order reshuffle
// every epoch from the config seed, so a fixed (config, dataset) pair replays
// bit-identically. With td_tail_augment, each sample redraws m in [1, 3]
// (capped by its available extras) every epoch.
//
// The cosine schedule spans all epochs of the run. When `state` is given it
// is updated after every epoch; a state with completed_epochs > 0 resumes
// mid-schedule. epoch_end fires after each epoch for checkpointing.
TrainResult train(STGDNet<float>& model, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                  TrainState* state = nullptr, const std::function<void(int epoch)>& epoch_end = {});

// Loss-history CSV: header "step,lr,loss", one row per optimizer step.
void write_loss_history(const std::string& path, const std::vector<StepRecord>& history, bool append = false);

// Optimizer/schedule state persistence, next to the model checkpoint.
void save_train_state(const std::string& dir, const TrainState& state);
TrainState load_train_state(const std::string& dir);

}  // namespace cvsdeblur
