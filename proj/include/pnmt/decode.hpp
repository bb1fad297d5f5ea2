#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pnmt/bridge.hpp"
#include "pnmt/tensor.hpp"
#include "pnmt/transformer.hpp"

namespace pnmt {

// One decoded sequence plus the full probability row observed at each step,
// so downstream stages can re-weight or correct the distributions.
struct Hypothesis {
  std::vector<int> tokens;  // generated ids; ends with EOS unless truncated
  double score = 0.0;       // cumulative log-probability of the chosen tokens
  bool truncated = false;   // hit the length limit before EOS
  ProbDistSeq dist_seq;     // rows from this hypothesis's own prefix path
};

struct BeamConfig {
  int beam_size = 5;
  int n_best = 1;
  int64_t max_len = 64;
  double length_penalty = 1.0;  // exponent on length when ranking

  void validate() const;
};

// score / len^length_penalty
double normalized_score(const Hypothesis& hyp, double length_penalty);
// recomputes the cumulative log-probability from the stored rows
double recompute_score(const Hypothesis& hyp);

// src holds content tokens; the encoder EOS is appended internally. Soft
// variants take pre-built mixing rows (the bridge output), used as-is.
Hypothesis greedy_decode(TransformerModel& model, std::span<const int> src,
                         const BeamConfig& cfg);
Hypothesis greedy_decode_soft(TransformerModel& model, const Tensor& soft_rows,
                              const BeamConfig& cfg);

// Width-beam_size search keeping the best expansions by cumulative score;
// hypotheses retire on EOS and the rest continue until the length limit, so
// beam_size 1 reproduces greedy_decode exactly. Results are best-first by
// normalized score, at most n_best of them.
std::vector<Hypothesis> beam_search(TransformerModel& model, std::span<const int> src,
                                    const BeamConfig& cfg);
std::vector<Hypothesis> beam_search_soft(TransformerModel& model, const Tensor& soft_rows,
                                         const BeamConfig& cfg);

}  // namespace pnmt
