#include "pnmt/bleu.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "pnmt/data.hpp"

namespace pnmt {

namespace {

// clipped n-gram matches of hyp against ref, and the hyp n-gram total
void count_ngrams(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                  int n, int64_t& matches, int64_t& total) {
  const int64_t h = static_cast<int64_t>(hyp.size()) - n + 1;
  const int64_t r = static_cast<int64_t>(ref.size()) - n + 1;
  if (h > 0) total += h;
  if (h <= 0 || r <= 0) return;
  std::map<std::vector<std::string>, int64_t> ref_counts;
  for (int64_t i = 0; i < r; ++i)
    ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
  for (int64_t i = 0; i < h; ++i) {
    auto it = ref_counts.find({hyp.begin() + i, hyp.begin() + i + n});
    if (it != ref_counts.end() && it->second > 0) {
      ++matches;
      --it->second;
    }
  }
}

}  // namespace

BleuReport bleu(std::span<const std::string> hypotheses,
                std::span<const std::string> references) {
  if (hypotheses.empty()) throw std::invalid_argument("bleu: empty corpus");
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu: " + std::to_string(hypotheses.size()) +
                                " hypotheses vs " + std::to_string(references.size()) +
                                " references");

  BleuReport rep;
  int64_t matches[4] = {};
  int64_t totals[4] = {};
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = split_tokens(hypotheses[i]);
    const auto ref = split_tokens(references[i]);
    rep.hyp_length += static_cast<int64_t>(hyp.size());
    rep.ref_length += static_cast<int64_t>(ref.size());
    for (int n = 1; n <= 4; ++n) count_ngrams(hyp, ref, n, matches[n - 1], totals[n - 1]);
  }

  if (rep.hyp_length == 0) {
    rep.brevity_penalty = 0.0;
    return rep;
  }

  double smooth = 1.0;
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < 4; ++n) {
    if (totals[n] == 0) continue;  // hypotheses shorter than n+1 everywhere
    double p;
    if (matches[n] == 0) {
      smooth *= 2.0;
      p = 1.0 / (smooth * static_cast<double>(totals[n]));
    } else {
      p = static_cast<double>(matches[n]) / static_cast<double>(totals[n]);
    }
    rep.precisions[n] = p;
    log_sum += std::log(p);
    ++orders;
  }
  if (orders == 0) return rep;

  rep.brevity_penalty =
      rep.hyp_length >= rep.ref_length
          ? 1.0
          : std::exp(1.0 - static_cast<double>(rep.ref_length) /
                               static_cast<double>(rep.hyp_length));
  rep.bleu = 100.0 * rep.brevity_penalty * std::exp(log_sum / orders);
  return rep;
}

}  // namespace pnmt
