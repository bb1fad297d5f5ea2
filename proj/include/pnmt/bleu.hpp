#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace pnmt {

struct BleuReport {
  double bleu = 0.0;             // 0..100
  double precisions[4] = {};     // modified n-gram precisions after smoothing
  double brevity_penalty = 1.0;  // <= 1
  int64_t hyp_length = 0;
  int64_t ref_length = 0;
};

// Corpus BLEU over whitespace-tokenized text, one reference per hypothesis.
// Zero n-gram matches are smoothed exponentially: each zero order doubles a
// running factor s and scores 1/(s * total); orders with no n-grams at all
// drop out of the geometric mean.
BleuReport bleu(std::span<const std::string> hypotheses,
                std::span<const std::string> references);

}  // namespace pnmt
