#include "pnmt/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pnmt/rng.hpp"

namespace pnmt {

void AdamConfig::validate() const {
  if (peak_lr <= 0.0) throw std::invalid_argument("peak_lr must be positive");
  if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be at least 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  if (eps <= 0.0) throw std::invalid_argument("adam eps must be positive");
}

double lr_at_step(const AdamConfig& cfg, int64_t step) {
  if (step < 1) throw std::invalid_argument("lr schedule steps are 1-based");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup_steps);
  return cfg.peak_lr * std::min(s / w, std::sqrt(w / s));
}

Adam::Adam(AdamConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Adam::attach(const std::string& name, Tensor* param) {
  names_.push_back(name);
  params_.push_back(param);
  m_.emplace_back(static_cast<size_t>(param->numel()), 0.0);
  v_.emplace_back(static_cast<size_t>(param->numel()), 0.0);
}

std::vector<std::vector<double>> Adam::make_grad_buffer() const {
  std::vector<std::vector<double>> g;
  g.reserve(params_.size());
  for (const Tensor* p : params_) g.emplace_back(static_cast<size_t>(p->numel()), 0.0);
  return g;
}

void Adam::step(const std::vector<std::vector<double>>& grads) {
  if (grads.size() != params_.size())
    throw std::invalid_argument("gradient buffer does not match attached parameters");
  ++t_;
  const double lr = lr_at_step(cfg_, t_);
  last_lr_ = lr;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t s = 0; s < params_.size(); ++s) {
    Tensor& p = *params_[s];
    const auto& g = grads[s];
    if (g.size() != p.data.size())
      throw std::invalid_argument("gradient size mismatch for " + names_[s]);
    auto& m = m_[s];
    auto& v = v_[s];
    for (size_t j = 0; j < g.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      p.data[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
    }
    if (!p.all_finite())
      throw std::runtime_error("optimizer step " + std::to_string(t_) +
                               " made parameter '" + names_[s] + "' non-finite");
  }
}

namespace {

// forward + backward for one pair; folds parameter gradients into grads
double sentence_backward(TransformerModel& model, std::span<const int> src,
                         std::span<const int> tgt, uint64_t dropout_seed,
                         std::vector<std::vector<double>>& grads) {
  Tape tape(dropout_seed, /*grad_enabled=*/true, /*training=*/true);
  TapedTransformer tt(tape, model);
  Val logits = tt.decoder_logits(tt.encode_hard(with_eos(src)), with_bos(tgt));
  Val loss = tape.cross_entropy(logits, with_eos(tgt), model.config.label_smoothing, kPadId);
  const double value = tape.scalar(loss);
  if (!std::isfinite(value)) return value;
  tape.backward(loss);
  const auto& vals = tt.param_vals();
  for (size_t s = 0; s < vals.size(); ++s) {
    auto g = tape.grad(vals[s]);
    if (g.empty()) continue;
    auto& acc = grads[s];
    for (size_t j = 0; j < g.size(); ++j) acc[j] += g[j];
  }
  return value;
}

std::string format_epoch(const EpochStats& st, double seconds) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "epoch %lld  train %.4f  valid %.4f  lr %.2e  steps %lld  (%.1fs)",
                static_cast<long long>(st.epoch), st.train_loss, st.valid_loss, st.lr,
                static_cast<long long>(st.steps), seconds);
  return buf;
}

}  // namespace

LossStat teacher_forced_nll(TransformerModel& model, std::span<const int> src,
                            std::span<const int> tgt) {
  Tape tape(0, /*grad_enabled=*/false, /*training=*/false);
  TapedTransformer tt(tape, model);
  Val logits = tt.decoder_logits(tt.encode_hard(with_eos(src)), with_bos(tgt));
  Val loss = tape.cross_entropy(logits, with_eos(tgt), model.config.label_smoothing, kPadId);
  return {tape.scalar(loss), static_cast<int64_t>(tgt.size()) + 1};
}

LossStat corpus_nll(TransformerModel& model, const TokenizedPairs& pairs) {
  LossStat total;
  for (size_t i = 0; i < pairs.src.size(); ++i) {
    LossStat one = teacher_forced_nll(model, pairs.src[i], pairs.tgt[i]);
    total.sum += one.sum;
    total.tokens += one.tokens;
  }
  return total;
}

TrainResult train_model(TransformerModel& model, const TokenizedPairs& train,
                        const TokenizedPairs& valid, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (train.src.empty()) throw std::invalid_argument("training corpus is empty");
  cfg.adam.validate();

  Adam adam(cfg.adam);
  model.visit_params([&](const std::string& name, Tensor& t) { adam.attach(name, &t); });
  auto grads = adam.make_grad_buffer();

  TrainResult result;
  TransformerModel best = model;
  bool have_best = false;

  for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto batches = batch_iter(train, cfg.max_tokens, derive_seed(cfg.seed, "batch", epoch));
    double loss_sum = 0.0;
    int64_t token_sum = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      for (auto& slot : grads) std::fill(slot.begin(), slot.end(), 0.0);
      int64_t batch_tokens = 0;
      double batch_loss = 0.0;
      const auto& batch = batches[b];
      for (size_t i = 0; i < batch.indices.size(); ++i) {
        const auto idx = static_cast<size_t>(batch.indices[i]);
        const uint64_t drop_seed =
            derive_seed(cfg.seed, "dropout", static_cast<uint64_t>(epoch) * 1000003ULL + b, i);
        const double value =
            sentence_backward(model, train.src[idx], train.tgt[idx], drop_seed, grads);
        if (!std::isfinite(value))
          throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(b) +
                                   ", sentence " + std::to_string(batch.indices[i]));
        batch_loss += value;
        batch_tokens += static_cast<int64_t>(train.tgt[idx].size()) + 1;
      }
      const double scale = 1.0 / static_cast<double>(batch_tokens);
      for (auto& slot : grads)
        for (double& g : slot) g *= scale;
      adam.step(grads);
      loss_sum += batch_loss;
      token_sum += batch_tokens;
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(token_sum);
    // no held-out data: fall back to train loss for checkpoint selection
    st.valid_loss = valid.src.empty() ? st.train_loss : corpus_nll(model, valid).per_token();
    st.lr = adam.last_lr();
    st.steps = adam.steps_done();
    result.curve.push_back(st);

    if (!have_best || st.valid_loss < result.best_valid_loss) {
      have_best = true;
      best = model;
      result.best_epoch = epoch;
      result.best_valid_loss = st.valid_loss;
    }
    if (cfg.log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      cfg.log(format_epoch(st, secs));
    }
  }

  model = best;
  return result;
}

}  // namespace pnmt
