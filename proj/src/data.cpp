#include "pnmt/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pnmt/rng.hpp"

namespace pnmt {

namespace {

const char* kReserved[kNumReserved] = {"<pad>", "<s>", "</s>", "<unk>"};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

void check_sides(const std::string& base, const char* ext_a,
                 const std::vector<std::string>& a, const char* ext_b,
                 const std::vector<std::string>& b) {
  if (a.size() != b.size())
    throw std::runtime_error(base + ext_a + " has " + std::to_string(a.size()) + " lines but " +
                             base + ext_b + " has " + std::to_string(b.size()));
}

void check_no_empty(const std::string& path, const std::vector<std::string>& lines) {
  for (size_t i = 0; i < lines.size(); ++i)
    if (split_tokens(lines[i]).empty())
      throw std::runtime_error(path + ": empty sentence at line " + std::to_string(i + 1));
}

}  // namespace

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<int> with_eos(std::span<const int> tokens) {
  std::vector<int> out(tokens.begin(), tokens.end());
  out.push_back(kEosId);
  return out;
}

std::vector<int> with_bos(std::span<const int> tokens) {
  std::vector<int> out;
  out.reserve(tokens.size() + 1);
  out.push_back(kBosId);
  out.insert(out.end(), tokens.begin(), tokens.end());
  return out;
}

Vocab::Vocab() {
  for (const char* tok : kReserved) {
    ids_.emplace(tok, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(tok);
  }
}

int Vocab::add(const std::string& token) {
  auto [it, inserted] = ids_.try_emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= static_cast<int>(tokens_.size()))
    throw std::out_of_range("vocab: id " + std::to_string(id) + " outside size " +
                            std::to_string(tokens_.size()));
  return tokens_[static_cast<size_t>(id)];
}

std::vector<int> Vocab::encode(const std::string& sentence) const {
  std::vector<int> out;
  for (const auto& tok : split_tokens(sentence)) out.push_back(id(tok));
  return out;
}

std::string Vocab::decode(std::span<const int> ids, bool skip_reserved) const {
  std::vector<std::string> toks;
  for (int i : ids) {
    if (skip_reserved && i < kNumReserved) continue;
    toks.push_back(token(i));
  }
  return join_tokens(toks);
}

void Vocab::save(const std::string& path) const {
  std::vector<std::string> lines(tokens_.begin() + kNumReserved, tokens_.end());
  write_lines(path, lines);
}

Vocab Vocab::load(const std::string& path) {
  Vocab v;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    v.add(line);
  }
  return v;
}

ParallelCorpus read_parallel(const std::string& base) {
  ParallelCorpus c;
  c.src = read_lines(base + ".src");
  c.tgt = read_lines(base + ".tgt");
  check_sides(base, ".src", c.src, ".tgt", c.tgt);
  check_no_empty(base + ".src", c.src);
  check_no_empty(base + ".tgt", c.tgt);
  return c;
}

void write_parallel(const std::string& base, const ParallelCorpus& corpus) {
  write_lines(base + ".src", corpus.src);
  write_lines(base + ".tgt", corpus.tgt);
}

TrilingualCorpus read_trilingual(const std::string& base) {
  TrilingualCorpus c;
  c.src = read_lines(base + ".src");
  c.piv = read_lines(base + ".piv");
  c.tgt = read_lines(base + ".tgt");
  check_sides(base, ".src", c.src, ".piv", c.piv);
  check_sides(base, ".src", c.src, ".tgt", c.tgt);
  check_no_empty(base + ".src", c.src);
  check_no_empty(base + ".piv", c.piv);
  check_no_empty(base + ".tgt", c.tgt);
  return c;
}

void write_trilingual(const std::string& base, const TrilingualCorpus& corpus) {
  write_lines(base + ".src", corpus.src);
  write_lines(base + ".piv", corpus.piv);
  write_lines(base + ".tgt", corpus.tgt);
}

Vocab build_vocab(std::span<const std::vector<std::string>* const> sides) {
  Vocab v;
  for (const auto* side : sides)
    for (const auto& sentence : *side)
      for (const auto& tok : split_tokens(sentence)) v.add(tok);
  return v;
}

void SyntheticTaskSpec::validate() const {
  if (latent_vocab < 4) throw std::invalid_argument("synthetic task: latent vocabulary below 4");
  if (len_min < 1 || len_min > len_max)
    throw std::invalid_argument("synthetic task: bad length range [" + std::to_string(len_min) +
                                ", " + std::to_string(len_max) + "]");
  if (n_src_piv < 0 || n_piv_tgt < 0 || n_src_tgt < 0)
    throw std::invalid_argument("synthetic task: negative corpus size");
}

SyntheticTask::SyntheticTask(SyntheticTaskSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

std::vector<int> SyntheticTask::parse(const std::string& sentence, char prefix,
                                      int unshift) const {
  std::vector<int> latent;
  for (const auto& tok : split_tokens(sentence)) {
    if (tok.size() < 2 || tok[0] != prefix)
      throw std::invalid_argument("synthetic task: token '" + tok + "' does not look like " +
                                  std::string(1, prefix) + "<k>");
    int k = std::stoi(tok.substr(1));
    latent.push_back(((k - unshift) % spec_.latent_vocab + spec_.latent_vocab) %
                     spec_.latent_vocab);
  }
  return latent;
}

namespace {

std::string render(std::span<const int> latent, char prefix, int shift, int vocab,
                   bool reverse) {
  std::vector<std::string> toks(latent.size());
  for (size_t i = 0; i < latent.size(); ++i)
    toks[i] = std::string(1, prefix) + std::to_string((latent[i] + shift) % vocab);
  if (reverse) std::reverse(toks.begin(), toks.end());
  return join_tokens(toks);
}

}  // namespace

std::string SyntheticTask::oracle_sp(const std::string& src_sentence) const {
  auto latent = parse(src_sentence, 's', 0);
  return render(latent, 'p', spec_.shift_sp, spec_.latent_vocab, false);
}

std::string SyntheticTask::oracle_pt(const std::string& piv_sentence) const {
  auto latent = parse(piv_sentence, 'p', spec_.shift_sp);
  return render(latent, 't', spec_.shift_pt, spec_.latent_vocab, spec_.reverse_target);
}

std::string SyntheticTask::oracle_st(const std::string& src_sentence) const {
  auto latent = parse(src_sentence, 's', 0);
  return render(latent, 't', spec_.shift_pt, spec_.latent_vocab, spec_.reverse_target);
}

TrilingualCorpus SyntheticTask::sample_triples(int64_t n, uint64_t stream_seed) const {
  Rng rng(stream_seed);
  TrilingualCorpus out;
  for (int64_t i = 0; i < n; ++i) {
    const auto len = rng.uniform_int(spec_.len_min, spec_.len_max);
    std::vector<int> latent(static_cast<size_t>(len));
    for (auto& v : latent) v = static_cast<int>(rng.uniform_int(0, spec_.latent_vocab - 1));
    out.src.push_back(render(latent, 's', 0, spec_.latent_vocab, false));
    out.piv.push_back(render(latent, 'p', spec_.shift_sp, spec_.latent_vocab, false));
    out.tgt.push_back(render(latent, 't', spec_.shift_pt, spec_.latent_vocab,
                             spec_.reverse_target));
  }
  return out;
}

SyntheticData generate_synthetic(const SyntheticTaskSpec& spec) {
  SyntheticTask task(spec);
  SyntheticData data;

  auto sp = task.sample_triples(spec.n_src_piv, derive_seed(spec.seed, "src-piv"));
  data.src_piv.src = std::move(sp.src);
  data.src_piv.tgt = std::move(sp.piv);

  auto pt = task.sample_triples(spec.n_piv_tgt, derive_seed(spec.seed, "piv-tgt"));
  data.piv_tgt.src = std::move(pt.piv);
  data.piv_tgt.tgt = std::move(pt.tgt);

  auto st = task.sample_triples(spec.n_src_tgt, derive_seed(spec.seed, "src-tgt"));
  data.src_tgt.src = std::move(st.src);
  data.src_tgt.tgt = std::move(st.tgt);

  return data;
}

TokenizedPairs tokenize_pairs(const ParallelCorpus& corpus, const Vocab& src_vocab,
                              const Vocab& tgt_vocab) {
  TokenizedPairs out;
  out.src.reserve(corpus.src.size());
  out.tgt.reserve(corpus.tgt.size());
  for (const auto& s : corpus.src) out.src.push_back(src_vocab.encode(s));
  for (const auto& t : corpus.tgt) out.tgt.push_back(tgt_vocab.encode(t));
  return out;
}

std::vector<Batch> batch_iter(const TokenizedPairs& pairs, int64_t max_tokens, uint64_t seed) {
  const int64_t n = static_cast<int64_t>(pairs.src.size());
  for (int64_t i = 0; i < n; ++i) {
    const auto longer = static_cast<int64_t>(std::max(pairs.src[i].size(), pairs.tgt[i].size()));
    if (longer > max_tokens)
      throw std::invalid_argument("batch_iter: sentence " + std::to_string(i) + " has " +
                                  std::to_string(longer) + " tokens, over the budget of " +
                                  std::to_string(max_tokens));
  }

  // shuffle, then bucket by length so padding stays small, then shuffle batches
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return std::max(pairs.src[a].size(), pairs.tgt[a].size()) <
           std::max(pairs.src[b].size(), pairs.tgt[b].size());
  });

  std::vector<Batch> batches;
  Batch cur;
  int64_t cur_max = 0;
  auto flush = [&] {
    if (cur.indices.empty()) return;
    for (int64_t idx : cur.indices) {
      cur.src.push_back(pairs.src[static_cast<size_t>(idx)]);
      cur.tgt.push_back(pairs.tgt[static_cast<size_t>(idx)]);
      cur.src_tokens += static_cast<int64_t>(cur.src.back().size());
      cur.tgt_tokens += static_cast<int64_t>(cur.tgt.back().size());
    }
    int64_t src_max = 0, tgt_max = 0;
    for (const auto& s : cur.src) src_max = std::max<int64_t>(src_max, s.size());
    for (const auto& t : cur.tgt) tgt_max = std::max<int64_t>(tgt_max, t.size());
    for (auto& s : cur.src) s.resize(static_cast<size_t>(src_max), kPadId);
    for (auto& t : cur.tgt) t.resize(static_cast<size_t>(tgt_max), kPadId);
    batches.push_back(std::move(cur));
    cur = Batch{};
    cur_max = 0;
  };

  for (int64_t idx : order) {
    const auto len = static_cast<int64_t>(
        std::max(pairs.src[static_cast<size_t>(idx)].size(), pairs.tgt[static_cast<size_t>(idx)].size()));
    const int64_t next_max = std::max(cur_max, len);
    if (!cur.indices.empty() &&
        next_max * static_cast<int64_t>(cur.indices.size() + 1) > max_tokens)
      flush();
    cur.indices.push_back(idx);
    cur_max = std::max(cur_max, len);
  }
  flush();

  std::shuffle(batches.begin(), batches.end(), rng.engine());
  return batches;
}

}  // namespace pnmt
