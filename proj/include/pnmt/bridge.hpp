#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pnmt/tape.hpp"
#include "pnmt/tensor.hpp"

namespace pnmt {

enum class CorrectionMode { none, eq1, add1, add05, exc };

std::string to_string(CorrectionMode mode);
CorrectionMode correction_from_string(const std::string& name);

struct BridgeConfig {
  double alpha_train = 1.0;
  double alpha_decode = 1.0;
  CorrectionMode correction = CorrectionMode::none;
  bool normalize_after_correction = false;

  void validate() const;
};

// A decoded (or teacher-forced) pivot sequence together with the full
// probability row that produced each token.
struct ProbDistSeq {
  std::vector<int> tokens;  // z_1..z_T
  Tensor dists;             // [T x V], row t = p(. | z_<t, source)

  int64_t length() const { return static_cast<int64_t>(tokens.size()); }
  int64_t vocab() const { return dists.shape.size() == 2 ? dists.cols() : 0; }
  void validate() const;  // raw rows: non-negative, sum 1 +- 1e-6, one per token
};

// lowest index wins ties
int64_t argmax_row(std::span<const double> row);

// out[z] = row[z]^alpha / sum(row^alpha); sharpens for alpha > 1
std::vector<double> renormalize(std::span<const double> row, double alpha);
Tensor renormalize_rows(const Tensor& dists, double alpha);

// positions whose stored token is not the argmax of its own row
std::vector<int64_t> detect_inconsistencies(const ProbDistSeq& seq);

// Applies the chosen heuristic at every inconsistent position so the
// generated token ends up with the biggest weight. Rows where the generated
// token already ties the maximum are left alone. Corrected rows are NOT
// re-scaled, so they may no longer sum to 1 (exc excepted, a permutation).
ProbDistSeq correct(const ProbDistSeq& seq, CorrectionMode mode);

enum class BridgePhase { train, decode };

// Decode-phase weights: renormalize with alpha_decode, then correct, then
// optionally rescale rows to sum 1. The result feeds encode_soft.
Tensor bridge_weights(const ProbDistSeq& seq, const BridgeConfig& cfg, BridgePhase phase);

// Train-phase weights on a tape: pure Eq-style renormalization, no
// correction, gradients flow through.
Val bridge_weights_train(Tape& tape, Val dists, const BridgeConfig& cfg);

// keep the k largest entries per row and rescale them to the dropped mass
Tensor sparsify_top_k(const Tensor& rows, int64_t k);

// one position per line: token id, TAB, space-separated id:prob pairs for
// entries above 1e-6 (smaller entries are dropped, by design)
void write_dist_seq(std::ostream& out, const ProbDistSeq& seq);
ProbDistSeq read_dist_seq(std::istream& in, int64_t vocab);

}  // namespace pnmt
