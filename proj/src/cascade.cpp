#include "pnmt/cascade.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pnmt/bleu.hpp"
#include "pnmt/rng.hpp"

namespace pnmt {

void LossWeights::validate() const {
  if (beta < 0.0 || gamma < 0.0) throw std::invalid_argument("loss weights must be non-negative");
  if (beta == 0.0 && gamma == 0.0)
    throw std::invalid_argument("loss weights must not both be zero");
}

void CascadeModel::validate() const {
  if (sp.config.tgt_vocab_size != pt.config.src_vocab_size)
    throw std::invalid_argument(
        "cascade halves disagree on the pivot vocabulary: sp emits " +
        std::to_string(sp.config.tgt_vocab_size) + " ids, pt consumes " +
        std::to_string(pt.config.src_vocab_size));
  bridge.validate();
}

void validate_example(const TrilingualExample& ex, const CascadeModel& cm) {
  if (ex.src.empty() || ex.piv.empty() || ex.tgt.empty())
    throw std::invalid_argument("trilingual example has an empty side");
  auto check = [](size_t len, int64_t max_len, const char* what) {
    if (static_cast<int64_t>(len) + 1 > max_len)
      throw std::length_error(std::string(what) + " sequence of " + std::to_string(len) +
                              " tokens exceeds max_len " + std::to_string(max_len));
  };
  check(ex.src.size(), cm.sp.config.max_len, "source");
  check(ex.piv.size(), cm.sp.config.max_len, "pivot");
  check(ex.piv.size(), cm.pt.config.max_len, "pivot");
  check(ex.tgt.size(), cm.pt.config.max_len, "target");
}

TapedCascade::TapedCascade(Tape& tape, CascadeModel& cm)
    : tape_(tape), cm_(cm), sp_(tape, cm.sp), pt_(tape, cm.pt) {
  cm.validate();
}

CascadeForward TapedCascade::forward(const TrilingualExample& ex, const LossWeights& lw) {
  lw.validate();
  validate_example(ex, cm_);

  Val enc_sp = sp_.encode_hard(with_eos(ex.src));
  Val logits_z = sp_.decoder_logits(enc_sp, with_bos(ex.piv));
  Val l_pivot = tape_.cross_entropy(logits_z, with_eos(ex.piv),
                                    cm_.sp.config.label_smoothing, kPadId);

  Val probs_z = tape_.softmax_rows(logits_z);
  Val weights = bridge_weights_train(tape_, probs_z, cm_.bridge);
  Val enc_pt = pt_.encode_soft(weights);
  Val logits_y = pt_.decoder_logits(enc_pt, with_bos(ex.tgt));
  Val l_target = tape_.cross_entropy(logits_y, with_eos(ex.tgt),
                                     cm_.pt.config.label_smoothing, kPadId);

  CascadeForward out;
  out.pivot_loss = l_pivot;
  out.target_loss = l_target;
  out.total = tape_.axpby(lw.beta, l_pivot, lw.gamma, l_target);
  out.pivot_value = tape_.scalar(l_pivot);
  out.target_value = tape_.scalar(l_target);
  out.total_value = tape_.scalar(out.total);
  out.pivot_tokens = static_cast<int64_t>(ex.piv.size()) + 1;
  out.target_tokens = static_cast<int64_t>(ex.tgt.size()) + 1;
  return out;
}

CascadeLoss cascade_loss(CascadeModel& cm, const TrilingualExample& ex, const LossWeights& lw) {
  Tape tape(0, /*grad_enabled=*/false, /*training=*/false);
  TapedCascade tc(tape, cm);
  CascadeForward fwd = tc.forward(ex, lw);
  return {fwd.pivot_value, fwd.target_value, fwd.total_value};
}

namespace {

// generated content without the final EOS; lone EOS if nothing remains
std::vector<int> decoded_content(const Hypothesis& hyp) {
  std::vector<int> content = hyp.tokens;
  if (!content.empty() && content.back() == kEosId) content.pop_back();
  return content;
}

}  // namespace

TrilingualCorpus generate_pseudo_pivot(TransformerModel& sp, const ParallelCorpus& src_tgt,
                                       const Vocab& src_vocab, const Vocab& piv_vocab,
                                       const BeamConfig& beam,
                                       const std::function<void(const std::string&)>& log) {
  BeamConfig cfg = beam;
  cfg.n_best = 1;
  // generated content must fit back into a teacher-forced decoder (BOS + content)
  cfg.max_len = std::min(cfg.max_len, sp.config.max_len - 1);
  cfg.validate();
  TrilingualCorpus out;
  for (int64_t i = 0; i < src_tgt.size(); ++i) {
    const auto src = src_vocab.encode(src_tgt.src[static_cast<size_t>(i)]);
    const Hypothesis best = beam_search(sp, src, cfg).front();
    std::string text = piv_vocab.decode(decoded_content(best));
    if (text.empty()) {
      text = piv_vocab.token(kEosId);
      if (log)
        log("pseudo-pivot: empty decode for sentence " + std::to_string(i) +
            ", substituting " + text);
    }
    out.src.push_back(src_tgt.src[static_cast<size_t>(i)]);
    out.piv.push_back(text);
    out.tgt.push_back(src_tgt.tgt[static_cast<size_t>(i)]);
  }
  return out;
}

CascadeDecodeResult cascade_decode(CascadeModel& cm, std::span<const int> src,
                                   const BeamConfig& pivot_beam, int n_pivot,
                                   const BeamConfig& target_beam, int m_target,
                                   bool target_only_score, int sparsify_k) {
  cm.validate();
  if (n_pivot < 1 || n_pivot > pivot_beam.beam_size)
    throw std::invalid_argument("n_pivot must lie in [1, pivot beam size]");
  if (m_target < 1 || m_target > target_beam.beam_size)
    throw std::invalid_argument("m_target must lie in [1, target beam size]");

  BeamConfig pcfg = pivot_beam;
  pcfg.n_best = n_pivot;
  pcfg.validate();
  BeamConfig tcfg = target_beam;
  tcfg.n_best = m_target;
  tcfg.validate();

  CascadeDecodeResult result;
  for (const Hypothesis& ph : beam_search(cm.sp, src, pcfg)) {
    Tensor weights = bridge_weights(ph.dist_seq, cm.bridge, BridgePhase::decode);
    if (sparsify_k > 0) weights = sparsify_top_k(weights, sparsify_k);
    for (Hypothesis& th : beam_search_soft(cm.pt, weights, tcfg)) {
      CascadeCandidate cand;
      cand.pivot = ph;
      cand.pivot_score = normalized_score(ph, pivot_beam.length_penalty);
      cand.target_score = normalized_score(th, target_beam.length_penalty);
      cand.combined =
          target_only_score ? cand.target_score : cand.pivot_score + cand.target_score;
      cand.target = std::move(th);
      result.candidates.push_back(std::move(cand));
    }
  }
  // ties keep (pivot rank, target rank) order
  std::stable_sort(result.candidates.begin(), result.candidates.end(),
                   [](const CascadeCandidate& a, const CascadeCandidate& b) {
                     return a.combined > b.combined;
                   });
  return result;
}

namespace {

struct ValState {
  std::vector<TrilingualExample> triples;  // pseudo-pivot frozen at entry
  std::vector<std::string> refs;
};

ValState freeze_validation(CascadeModel& cm, const TokenizedPairs& valid,
                           const Vocab& tgt_vocab) {
  ValState vs;
  BeamConfig greedy;
  greedy.beam_size = 1;
  greedy.n_best = 1;
  // frozen pivots are teacher-forced later, so leave room for the BOS shift
  greedy.max_len = cm.sp.config.max_len - 1;
  for (size_t i = 0; i < valid.src.size(); ++i) {
    TrilingualExample ex;
    ex.src = valid.src[i];
    ex.tgt = valid.tgt[i];
    ex.piv = decoded_content(greedy_decode(cm.sp, ex.src, greedy));
    if (ex.piv.empty()) ex.piv = {kEosId};
    vs.triples.push_back(std::move(ex));
    vs.refs.push_back(tgt_vocab.decode(valid.tgt[i]));
  }
  return vs;
}

struct ValScore {
  double bleu = 0.0;
  double loss = 0.0;  // per-token cascade loss on the frozen triples
};

ValScore score_validation(CascadeModel& cm, const ValState& vs, const LossWeights& lw,
                          const Vocab& tgt_vocab) {
  BeamConfig greedy;
  greedy.beam_size = 1;
  greedy.n_best = 1;
  greedy.max_len = std::min(cm.sp.config.max_len, cm.pt.config.max_len);

  std::vector<std::string> hyps;
  double loss_sum = 0.0;
  int64_t tokens = 0;
  for (const auto& ex : vs.triples) {
    CascadeDecodeResult dec = cascade_decode(cm, ex.src, greedy, 1, greedy, 1);
    hyps.push_back(tgt_vocab.decode(decoded_content(dec.best().target)));
    loss_sum += cascade_loss(cm, ex, lw).total;
    tokens += static_cast<int64_t>(ex.piv.size() + ex.tgt.size()) + 2;
  }
  ValScore out;
  out.bleu = bleu(hyps, vs.refs).bleu;
  out.loss = loss_sum / static_cast<double>(tokens);
  return out;
}

std::string format_finetune_epoch(const FinetuneEpoch& st, double seconds) {
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "epoch %lld  pivot %.4f  target %.4f  total %.4f  val-bleu %.2f  val-loss %.4f  "
                "lr %.2e  (%.1fs)",
                static_cast<long long>(st.epoch), st.pivot_loss, st.target_loss, st.total_loss,
                st.valid_bleu, st.valid_loss, st.lr, seconds);
  return buf;
}

}  // namespace

FinetuneResult finetune(CascadeModel& cm, const std::vector<TrilingualExample>& train,
                        const TokenizedPairs& valid, const Vocab& tgt_vocab,
                        const FinetuneConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (train.empty()) throw std::invalid_argument("fine-tuning corpus is empty");
  cfg.adam.validate();
  cfg.weights.validate();
  cm.validate();

  Adam adam(cfg.adam);
  cm.sp.visit_params([&](const std::string& n, Tensor& t) { adam.attach("sp." + n, &t); });
  const int64_t sp_slots = adam.num_slots();
  cm.pt.visit_params([&](const std::string& n, Tensor& t) { adam.attach("pt." + n, &t); });
  auto grads = adam.make_grad_buffer();

  const ValState vs = freeze_validation(cm, valid, tgt_vocab);

  // bucket by (src, tgt) lengths; pivot lengths track them closely
  TokenizedPairs lens;
  for (const auto& ex : train) {
    lens.src.push_back(ex.src);
    lens.tgt.push_back(ex.tgt);
  }

  FinetuneResult result;
  CascadeModel best = cm;
  bool have_best = false;

  for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto batches = batch_iter(lens, cfg.max_tokens, derive_seed(cfg.seed, "batch", epoch));
    double pivot_sum = 0.0, target_sum = 0.0, total_sum = 0.0;
    int64_t pivot_tokens = 0, target_tokens = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      for (auto& slot : grads) std::fill(slot.begin(), slot.end(), 0.0);
      int64_t batch_tokens = 0;
      const auto& batch = batches[b];
      for (size_t i = 0; i < batch.indices.size(); ++i) {
        const auto& ex = train[static_cast<size_t>(batch.indices[i])];
        Tape tape(derive_seed(cfg.seed, "dropout",
                              static_cast<uint64_t>(epoch) * 1000003ULL + b, i),
                  /*grad_enabled=*/true, /*training=*/true);
        TapedCascade tc(tape, cm);
        CascadeForward fwd = tc.forward(ex, cfg.weights);
        if (!std::isfinite(fwd.total_value))
          throw std::runtime_error("fine-tuning diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(b) +
                                   ", example " + std::to_string(batch.indices[i]));
        tape.backward(fwd.total);
        const auto& spv = tc.sp_params();
        for (size_t s = 0; s < spv.size(); ++s) {
          auto g = tape.grad(spv[s]);
          if (g.empty()) continue;
          auto& acc = grads[s];
          for (size_t j = 0; j < g.size(); ++j) acc[j] += g[j];
        }
        const auto& ptv = tc.pt_params();
        for (size_t s = 0; s < ptv.size(); ++s) {
          auto g = tape.grad(ptv[s]);
          if (g.empty()) continue;
          auto& acc = grads[static_cast<size_t>(sp_slots) + s];
          for (size_t j = 0; j < g.size(); ++j) acc[j] += g[j];
        }
        pivot_sum += fwd.pivot_value;
        target_sum += fwd.target_value;
        total_sum += fwd.total_value;
        pivot_tokens += fwd.pivot_tokens;
        target_tokens += fwd.target_tokens;
        batch_tokens += fwd.pivot_tokens + fwd.target_tokens;
      }
      const double scale = 1.0 / static_cast<double>(batch_tokens);
      for (auto& slot : grads)
        for (double& g : slot) g *= scale;
      adam.step(grads);
    }

    FinetuneEpoch st;
    st.epoch = epoch;
    st.pivot_loss = pivot_sum / static_cast<double>(pivot_tokens);
    st.target_loss = target_sum / static_cast<double>(target_tokens);
    st.total_loss = total_sum / static_cast<double>(pivot_tokens + target_tokens);
    if (vs.triples.empty()) {
      st.valid_bleu = 0.0;
      st.valid_loss = st.total_loss;  // no held-out data: select by train loss
    } else {
      ValScore val = score_validation(cm, vs, cfg.weights, tgt_vocab);
      st.valid_bleu = val.bleu;
      st.valid_loss = val.loss;
    }
    st.lr = adam.last_lr();
    st.steps = adam.steps_done();
    result.curve.push_back(st);

    const bool better =
        !have_best || st.valid_bleu > result.best_bleu ||
        (st.valid_bleu == result.best_bleu && st.valid_loss < result.best_loss);
    if (better) {
      have_best = true;
      best = cm;
      result.best_epoch = epoch;
      result.best_bleu = st.valid_bleu;
      result.best_loss = st.valid_loss;
    }
    if (cfg.log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      cfg.log(format_finetune_epoch(st, secs));
    }
  }

  cm = best;
  return result;
}

}  // namespace pnmt
