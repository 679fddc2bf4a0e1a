#include "cvsdeblur/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cvsdeblur/bridge.hpp"
#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/ops.hpp"
#include "cvsdeblur/optim.hpp"
#include "cvsdeblur/rng.hpp"

namespace fs = std::filesystem;

namespace cvsdeblur {

template <typename T>
nn::TensorT<T> psnr_loss(const nn::TensorT<T>& pred, const nn::TensorT<T>& target, T lambda, T eps) {
  if (!pred.defined() || !target.defined()) throw ValidationError("psnr_loss: undefined input");
  if (pred.shape() != target.shape()) {
    throw ValidationError("psnr_loss: shape mismatch " + nn::shape_str(pred.shape()) + " vs " +
                          nn::shape_str(target.shape()));
  }
  if (!(eps > T(0))) throw ValidationError("psnr_loss: eps must be positive");
  nn::TensorT<T> d = nn::sub(pred, target);
  nn::TensorT<T> mse = nn::mean_all(nn::mul(d, d));
  const T k = lambda * T(10) / std::log(T(10));
  return nn::scale(nn::log_e(nn::add_scalar(mse, eps)), k);
}

template nn::TensorT<float> psnr_loss<float>(const nn::TensorT<float>&, const nn::TensorT<float>&, float, float);
template nn::TensorT<double> psnr_loss<double>(const nn::TensorT<double>&, const nn::TensorT<double>&, double,
                                               double);

double psnr_loss_value(const Frame& pred, const Frame& target, double lambda, double eps) {
  if (!pred.same_shape(target)) throw ValidationError("psnr_loss_value: shape mismatch");
  if (!(eps > 0)) throw ValidationError("psnr_loss_value: eps must be positive");
  double sse = 0.0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(pred.size());
  return lambda * 10.0 * std::log10(mse + eps);
}

namespace {

struct Batch {
  std::vector<size_t> indices;  // into the dataset
};

void check_dataset(const std::vector<TrainSample>& data) {
  if (data.empty()) throw ValidationError("train: empty dataset");
  for (size_t i = 0; i < data.size(); ++i) {
    const CVSSample& s = data[i].sample;
    if (s.n < 2 || static_cast<int>(s.td_seq.size()) != s.n - 1 ||
        static_cast<int>(s.sd_seq.size()) != s.n) {
      throw ValidationError("train: sample " + std::to_string(i) + " has inconsistent sequences");
    }
    if (!s.gt.count(s.gt_index)) {
      throw ValidationError("train: sample " + std::to_string(i) + " lacks its target frame");
    }
  }
}

}  // namespace

TrainResult train(STGDNet<float>& model, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                  TrainState* state, const std::function<void(int epoch)>& epoch_end) {
  if (cfg.epochs < 1) throw ValidationError("train: epochs must be positive");
  if (cfg.batch_size < 1) throw ValidationError("train: batch_size must be positive");
  if (cfg.lr_max < cfg.lr_min || cfg.lr_min < 0) throw ValidationError("train: bad learning-rate range");
  check_dataset(data);

  // Deterministic grouping by N; batches never mix exposure lengths.
  std::map<int, std::vector<size_t>> groups;
  for (size_t i = 0; i < data.size(); ++i) groups[data[i].sample.n].push_back(i);
  std::int64_t batches_per_epoch = 0;
  for (const auto& [n, idxs] : groups) {
    batches_per_epoch += static_cast<std::int64_t>((idxs.size() + cfg.batch_size - 1) / cfg.batch_size);
  }
  const std::int64_t total_steps = batches_per_epoch * cfg.epochs;

  nn::AdamWConfig ocfg;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.eps = cfg.adam_eps;
  ocfg.weight_decay = cfg.weight_decay;
  nn::AdamW<float> opt(model.parameters(), ocfg);

  std::mt19937_64 rng(cfg.seed);
  std::int64_t step = 0;
  int first_epoch = 0;
  if (state && state->completed_epochs > 0) {
    if (state->completed_epochs >= cfg.epochs) {
      throw ValidationError("train: resume state already covers all " + std::to_string(cfg.epochs) + " epochs");
    }
    first_epoch = state->completed_epochs;
    step = state->next_step;
    std::istringstream in(state->rng_state);
    in >> rng;
    if (!in) throw ValidationError("train: corrupt RNG state in resume data");
    // Restore moments; names follow the parameter registry.
    auto& params = model.parameters();
    if (state->opt_state.size() != params.size() * 2 + 1) {
      throw ValidationError("train: optimizer state does not match the parameter list");
    }
    for (size_t i = 0; i < params.size(); ++i) {
      const NamedTensor& m = state->opt_state[2 * i];
      const NamedTensor& v = state->opt_state[2 * i + 1];
      if (m.name != "opt.m." + params[i].name() || v.name != "opt.v." + params[i].name() ||
          m.data.size() != params[i].value().size() || v.data.size() != params[i].value().size()) {
        throw ValidationError("train: optimizer state mismatch at '" + params[i].name() + "'");
      }
      opt.moment1(i) = m.data;
      opt.moment2(i) = v.data;
    }
    opt.set_step_count(static_cast<std::int64_t>(state->opt_state.back().data[0]));
  }

  TrainResult result;
  result.total_steps = total_steps;

  for (int epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
    // Per-epoch augmentation draws, in dataset order.
    std::vector<int> aug_m(data.size(), 0);
    if (cfg.td_tail_augment) {
      for (size_t i = 0; i < data.size(); ++i) {
        const int avail = std::min<int>(3, static_cast<int>(data[i].extra_tds.size()));
        if (avail > 0) aug_m[i] = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(avail)));
      }
    }

    std::vector<Batch> batches;
    for (auto& [n, idxs] : groups) {
      std::vector<size_t> order = idxs;
      shuffle_indices(rng, order);
      for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.batch_size)) {
        Batch batch;
        for (size_t i = b; i < std::min(order.size(), b + static_cast<size_t>(cfg.batch_size)); ++i) {
          batch.indices.push_back(order[i]);
        }
        batches.push_back(std::move(batch));
      }
    }
    shuffle_indices(rng, batches);

    for (const Batch& batch : batches) {
      std::vector<CVSSample> effective;
      effective.reserve(batch.indices.size());
      for (size_t idx : batch.indices) {
        const TrainSample& ts = data[idx];
        if (aug_m[idx] > 0) {
          effective.push_back(augment_td_tail(ts.sample, ts.extra_tds, aug_m[idx]));
        } else {
          effective.push_back(ts.sample);
        }
      }

      const int n = effective[0].n;
      std::vector<const Frame*> blurs, gts;
      for (const CVSSample& s : effective) {
        blurs.push_back(&s.blur);
        gts.push_back(&s.gt.at(s.gt_index));
      }
      // The SD frame aligned with each sample's target tick keeps the input
      // and the supervision on the same instant.
      std::vector<const QuantFrame*> sds;
      for (const CVSSample& s : effective) sds.push_back(&s.sd_seq[static_cast<size_t>(s.gt_index)]);
      nn::Tensor blur_t = frames_to_tensor(blurs);
      nn::Tensor gt_t = frames_to_tensor(gts);
      nn::Tensor sd_t = quants_to_tensor(sds);
      std::vector<nn::Tensor> td_ts;
      for (int i = 0; i + 1 < n; ++i) {
        std::vector<const QuantFrame*> tds;
        for (const CVSSample& s : effective) tds.push_back(&s.td_seq[static_cast<size_t>(i)]);
        td_ts.push_back(quants_to_tensor(tds));
      }

      const double lr = nn::cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min);
      opt.set_lr(lr);
      nn::Tensor pred = model.forward(blur_t, sd_t, td_ts);
      nn::Tensor loss = psnr_loss(pred, gt_t, static_cast<float>(cfg.lambda_psnr),
                                  static_cast<float>(cfg.loss_eps));
      const double loss_v = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(loss_v)) {
        std::string ids;
        for (size_t idx : batch.indices) ids += (ids.empty() ? "" : ", ") + std::to_string(idx);
        throw NumericError("train: non-finite loss at step " + std::to_string(step) + " (batch samples " + ids +
                           ")");
      }
      opt.zero_grad();
      nn::backward(loss);
      opt.step();
      result.history.push_back({step, lr, loss_v});
      ++step;
    }

    if (state) {
      state->completed_epochs = epoch + 1;
      state->next_step = step;
      std::ostringstream os;
      os << rng;
      state->rng_state = os.str();
      state->opt_state.clear();
      const auto& params = model.parameters();
      for (size_t i = 0; i < params.size(); ++i) {
        std::vector<std::int64_t> extents{static_cast<std::int64_t>(params[i].value().size())};
        state->opt_state.push_back({"opt.m." + params[i].name(), extents, opt.moment1(i)});
        state->opt_state.push_back({"opt.v." + params[i].name(), extents, opt.moment2(i)});
      }
      state->opt_state.push_back({"opt.t", {1}, {static_cast<float>(opt.step_count())}});
    }
    if (epoch_end) epoch_end(epoch);
  }
  return result;
}

void write_loss_history(const std::string& path, const std::vector<StepRecord>& history, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  if (!append) out << "step,lr,loss\n";
  char buf[96];
  for (const auto& rec : history) {
    std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g\n", static_cast<long long>(rec.step), rec.lr, rec.loss);
    out << buf;
  }
  if (!out) throw IoError("short write to " + path);
}

void save_train_state(const std::string& dir, const TrainState& state) {
  save_checkpoint((fs::path(dir) / "optimizer.ckpt").string(), state.opt_state);
  nlohmann::ordered_json j;
  j["completed_epochs"] = state.completed_epochs;
  j["next_step"] = state.next_step;
  j["rng_state"] = state.rng_state;
  const auto path = fs::path(dir) / "train_state.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("short write to " + path.string());
}

TrainState load_train_state(const std::string& dir) {
  TrainState state;
  state.opt_state = load_checkpoint((fs::path(dir) / "optimizer.ckpt").string());
  const auto path = fs::path(dir) / "train_state.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    state.completed_epochs = j.at("completed_epochs").get<int>();
    state.next_step = j.at("next_step").get<std::int64_t>();
    state.rng_state = j.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return state;
}

}  // namespace cvsdeblur
