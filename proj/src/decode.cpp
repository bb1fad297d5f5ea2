#include "pnmt/decode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pnmt/data.hpp"

namespace pnmt {

void BeamConfig::validate() const {
  if (beam_size < 1) throw std::invalid_argument("beam_size must be at least 1");
  if (n_best < 1 || n_best > beam_size)
    throw std::invalid_argument("n_best must lie in [1, beam_size]");
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  if (length_penalty < 0.0) throw std::invalid_argument("length_penalty must be non-negative");
}

double normalized_score(const Hypothesis& hyp, double length_penalty) {
  const double len = static_cast<double>(hyp.tokens.size());
  return hyp.score / std::pow(len, length_penalty);
}

double recompute_score(const Hypothesis& hyp) {
  double s = 0.0;
  for (size_t t = 0; t < hyp.tokens.size(); ++t)
    s += std::log(hyp.dist_seq.dists.at(static_cast<int64_t>(t), hyp.tokens[t]));
  return s;
}

namespace {

int64_t step_limit(const TransformerModel& model, const BeamConfig& cfg) {
  // generating the i-th token feeds a BOS-prefixed length-i input
  return std::min(cfg.max_len, model.config.max_len);
}

Hypothesis greedy_from_enc(TransformerModel& model, const EncoderOutput& enc,
                           const BeamConfig& cfg) {
  cfg.validate();
  const int64_t limit = step_limit(model, cfg);
  const int64_t vocab = model.config.tgt_vocab_size;

  Hypothesis hyp;
  std::vector<int> prefix = {kBosId};
  std::vector<double> rows;
  while (static_cast<int64_t>(hyp.tokens.size()) < limit) {
    Tensor p = decode_step(model, enc, prefix);
    const int tok = static_cast<int>(argmax_row(std::span<const double>(p.data)));
    rows.insert(rows.end(), p.data.begin(), p.data.end());
    hyp.score += std::log(p.data[static_cast<size_t>(tok)]);
    hyp.tokens.push_back(tok);
    prefix.push_back(tok);
    if (tok == kEosId) break;
  }
  hyp.truncated = hyp.tokens.empty() || hyp.tokens.back() != kEosId;
  hyp.dist_seq.tokens = hyp.tokens;
  hyp.dist_seq.dists = Tensor({static_cast<int64_t>(hyp.tokens.size()), vocab}, std::move(rows));
  return hyp;
}

// growing hypothesis with its distribution rows kept flat until it retires
struct Partial {
  std::vector<int> tokens;
  double score = 0.0;
  std::vector<double> rows;
};

Hypothesis materialize(Partial&& p, int64_t vocab, bool truncated) {
  Hypothesis hyp;
  hyp.tokens = p.tokens;
  hyp.score = p.score;
  hyp.truncated = truncated;
  hyp.dist_seq.tokens = std::move(p.tokens);
  hyp.dist_seq.dists =
      Tensor({static_cast<int64_t>(hyp.tokens.size()), vocab}, std::move(p.rows));
  return hyp;
}

std::vector<Hypothesis> beam_from_enc(TransformerModel& model, const EncoderOutput& enc,
                                      const BeamConfig& cfg) {
  cfg.validate();
  const int64_t limit = step_limit(model, cfg);
  const int64_t vocab = model.config.tgt_vocab_size;

  std::vector<Partial> live(1);
  std::vector<Hypothesis> finished;

  for (int64_t step = 0; step < limit && !live.empty(); ++step) {
    struct Cand {
      size_t h;
      int tok;
      double score;
    };
    std::vector<Cand> cands;
    cands.reserve(live.size() * static_cast<size_t>(vocab));
    std::vector<Tensor> dist(live.size());
    for (size_t h = 0; h < live.size(); ++h) {
      std::vector<int> prefix = {kBosId};
      prefix.insert(prefix.end(), live[h].tokens.begin(), live[h].tokens.end());
      dist[h] = decode_step(model, enc, prefix);
      for (int64_t v = 0; v < vocab; ++v)
        cands.push_back({h, static_cast<int>(v),
                         live[h].score + std::log(dist[h].data[static_cast<size_t>(v)])});
    }
    // stable sort keeps (lower hypothesis, lower token id) first on ties
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.score > b.score; });
    const size_t keep = std::min<size_t>(static_cast<size_t>(cfg.beam_size), cands.size());

    std::vector<Partial> next;
    next.reserve(keep);
    for (size_t c = 0; c < keep; ++c) {
      const Cand& cand = cands[c];
      Partial p = live[cand.h];
      p.tokens.push_back(cand.tok);
      p.score = cand.score;
      const auto& row = dist[cand.h].data;
      p.rows.insert(p.rows.end(), row.begin(), row.end());
      if (cand.tok == kEosId)
        finished.push_back(materialize(std::move(p), vocab, false));
      else
        next.push_back(std::move(p));
    }
    live = std::move(next);
  }
  for (auto& p : live) finished.push_back(materialize(std::move(p), vocab, true));

  std::stable_sort(finished.begin(), finished.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    return normalized_score(a, cfg.length_penalty) > normalized_score(b, cfg.length_penalty);
  });
  if (finished.size() > static_cast<size_t>(cfg.n_best))
    finished.resize(static_cast<size_t>(cfg.n_best));
  return finished;
}

}  // namespace

Hypothesis greedy_decode(TransformerModel& model, std::span<const int> src,
                         const BeamConfig& cfg) {
  EncoderOutput enc = encode(model, with_eos(src));
  return greedy_from_enc(model, enc, cfg);
}

Hypothesis greedy_decode_soft(TransformerModel& model, const Tensor& soft_rows,
                              const BeamConfig& cfg) {
  EncoderOutput enc = encode_soft_input(model, soft_rows);
  return greedy_from_enc(model, enc, cfg);
}

std::vector<Hypothesis> beam_search(TransformerModel& model, std::span<const int> src,
                                    const BeamConfig& cfg) {
  EncoderOutput enc = encode(model, with_eos(src));
  return beam_from_enc(model, enc, cfg);
}

std::vector<Hypothesis> beam_search_soft(TransformerModel& model, const Tensor& soft_rows,
                                         const BeamConfig& cfg) {
  EncoderOutput enc = encode_soft_input(model, soft_rows);
  return beam_from_enc(model, enc, cfg);
}

}  // namespace pnmt
