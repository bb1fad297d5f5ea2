#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pnmt/bridge.hpp"
#include "pnmt/data.hpp"
#include "pnmt/decode.hpp"
#include "pnmt/train.hpp"
#include "pnmt/transformer.hpp"

namespace pnmt {

struct LossWeights {
  double beta = 1.0;   // weight of the pivot-side loss
  double gamma = 1.0;  // weight of the target-side loss

  void validate() const;  // non-negative, not both zero
};

// Two translation models in series: sp reads the source and produces pivot
// distributions, which cross the soft bridge into pt's encoder.
struct CascadeModel {
  TransformerModel sp;  // source -> pivot
  TransformerModel pt;  // pivot -> target
  BridgeConfig bridge;

  void validate() const;  // halves must share the pivot vocabulary
};

struct TrilingualExample {
  std::vector<int> src, piv, tgt;  // content ids without BOS/EOS
};

void validate_example(const TrilingualExample& ex, const CascadeModel& cm);

struct CascadeForward {
  Val pivot_loss, target_loss, total;  // handles on the recording tape
  double pivot_value = 0.0, target_value = 0.0, total_value = 0.0;
  int64_t pivot_tokens = 0, target_tokens = 0;
};

// Records one end-to-end pass: sp teacher-forced on the pivot, its softmaxed
// rows re-normalized and mixed into pt's encoder, pt teacher-forced on the
// target. backward(total) reaches both halves through the bridge.
class TapedCascade {
 public:
  TapedCascade(Tape& tape, CascadeModel& cm);

  CascadeForward forward(const TrilingualExample& ex, const LossWeights& lw);

  const std::vector<Val>& sp_params() const { return sp_.param_vals(); }
  const std::vector<Val>& pt_params() const { return pt_.param_vals(); }

 private:
  Tape& tape_;
  CascadeModel& cm_;
  TapedTransformer sp_, pt_;
};

struct CascadeLoss {
  double pivot = 0.0, target = 0.0, total = 0.0;
};

// loss values only, on a private no-grad tape
CascadeLoss cascade_loss(CascadeModel& cm, const TrilingualExample& ex, const LossWeights& lw);

// Beam-translates the source side of (source, target) pairs into pivot text,
// top-1 per sentence. Empty decodes become a lone EOS token with a warning.
TrilingualCorpus generate_pseudo_pivot(TransformerModel& sp, const ParallelCorpus& src_tgt,
                                       const Vocab& src_vocab, const Vocab& piv_vocab,
                                       const BeamConfig& beam,
                                       const std::function<void(const std::string&)>& log = {});

struct CascadeCandidate {
  Hypothesis pivot, target;
  double pivot_score = 0.0;   // length-normalized log-probability
  double target_score = 0.0;  // length-normalized log-probability
  double combined = 0.0;
};

struct CascadeDecodeResult {
  std::vector<CascadeCandidate> candidates;  // best first by combined score
  const CascadeCandidate& best() const { return candidates.front(); }
};

// Two-stage decoding: top n_pivot pivot hypotheses, each corrected at the
// bridge and translated into m_target candidates. The combined score adds
// both length-normalized stages unless target_only_score is set. sparsify_k
// keeps only the k largest bridge weights per row (0 = off).
CascadeDecodeResult cascade_decode(CascadeModel& cm, std::span<const int> src,
                                   const BeamConfig& pivot_beam, int n_pivot,
                                   const BeamConfig& target_beam, int m_target,
                                   bool target_only_score = false, int sparsify_k = 0);

struct FinetuneEpoch {
  int64_t epoch = 0;
  double pivot_loss = 0.0, target_loss = 0.0, total_loss = 0.0;  // per token
  double valid_bleu = 0.0;
  double valid_loss = 0.0;  // mean cascade loss on frozen validation triples
  double lr = 0.0;
  int64_t steps = 0;
};

struct FinetuneConfig {
  int64_t epochs = 6;
  int64_t max_tokens = 2000;
  AdamConfig adam{3e-5, 100};  // a tenth of the pretraining peak, short warmup
  LossWeights weights;
  uint64_t seed = 1;
  std::function<void(const std::string&)> log;
};

struct FinetuneResult {
  std::vector<FinetuneEpoch> curve;
  int64_t best_epoch = 0;
  double best_bleu = 0.0;
  double best_loss = 0.0;
};

// End-to-end training on trilingual triples. Validation decodes the held-out
// sources greedily through the cascade and scores BLEU against the target
// side, ties broken by the cascade loss on triples whose pseudo-pivot is
// frozen at entry. The best parameters are restored before returning.
FinetuneResult finetune(CascadeModel& cm, const std::vector<TrilingualExample>& train,
                        const TokenizedPairs& valid, const Vocab& tgt_vocab,
                        const FinetuneConfig& cfg);

}  // namespace pnmt
