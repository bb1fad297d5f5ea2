#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pnmt/data.hpp"
#include "pnmt/tensor.hpp"
#include "pnmt/transformer.hpp"

namespace pnmt {

struct AdamConfig {
  double peak_lr = 3e-4;
  int64_t warmup_steps = 200;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;

  void validate() const;
};

// linear warmup to peak_lr at warmup_steps, then inverse-square-root decay
double lr_at_step(const AdamConfig& cfg, int64_t step);

// Adaptive-moment optimizer over externally owned tensors. Slots are fixed
// at attach time; step() applies one scheduled update and aborts if any
// parameter turns non-finite.
class Adam {
 public:
  explicit Adam(AdamConfig cfg);

  void attach(const std::string& name, Tensor* param);
  int64_t num_slots() const { return static_cast<int64_t>(params_.size()); }
  const std::string& slot_name(int64_t slot) const { return names_[static_cast<size_t>(slot)]; }
  const Tensor& slot_param(int64_t slot) const { return *params_[static_cast<size_t>(slot)]; }

  // grads[slot] must match the attached tensor's element count
  void step(const std::vector<std::vector<double>>& grads);
  int64_t steps_done() const { return t_; }
  double last_lr() const { return last_lr_; }

  // zeroed buffers shaped like the attached slots
  std::vector<std::vector<double>> make_grad_buffer() const;

 private:
  AdamConfig cfg_;
  std::vector<std::string> names_;
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
  double last_lr_ = 0.0;
};

struct TrainConfig {
  int64_t epochs = 2;
  int64_t max_tokens = 2000;  // batch budget, rows x padded length
  AdamConfig adam;
  uint64_t seed = 1;
  std::function<void(const std::string&)> log;  // null for silent
};

struct EpochStats {
  int64_t epoch = 0;
  double train_loss = 0.0;  // per target token, label-smoothed
  double valid_loss = 0.0;
  double lr = 0.0;
  int64_t steps = 0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  int64_t best_epoch = 0;
  double best_valid_loss = 0.0;
};

struct LossStat {
  double sum = 0.0;
  int64_t tokens = 0;
  double per_token() const { return tokens > 0 ? sum / static_cast<double>(tokens) : 0.0; }
};

// label-smoothed teacher-forced loss on a no-grad, no-dropout tape
LossStat teacher_forced_nll(TransformerModel& model, std::span<const int> src,
                            std::span<const int> tgt);
LossStat corpus_nll(TransformerModel& model, const TokenizedPairs& pairs);

// Trains src->tgt with per-sentence backward passes accumulated over each
// batch, normalized by target token count. Keeps the best-validation-loss
// parameters and restores them into the model before returning.
TrainResult train_model(TransformerModel& model, const TokenizedPairs& train,
                        const TokenizedPairs& valid, const TrainConfig& cfg);

}  // namespace pnmt
