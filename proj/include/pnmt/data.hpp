#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace pnmt {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumReserved = 4;

std::vector<std::string> split_tokens(const std::string& line);
std::string join_tokens(std::span<const std::string> tokens);

// sequence conventions: encoders consume tokens+EOS, decoders are fed
// BOS+tokens and supervised on tokens+EOS
std::vector<int> with_eos(std::span<const int> tokens);
std::vector<int> with_bos(std::span<const int> tokens);

class Vocab {
 public:
  Vocab();

  int add(const std::string& token);            // returns existing id if already present
  int id(const std::string& token) const;       // kUnkId for unknown tokens
  const std::string& token(int id) const;       // throws on out-of-range ids
  int64_t size() const { return static_cast<int64_t>(tokens_.size()); }

  std::vector<int> encode(const std::string& sentence) const;
  std::string decode(std::span<const int> ids, bool skip_reserved = true) const;

  // one non-reserved token per line; line k holds the token with id k + 4
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct ParallelCorpus {
  std::vector<std::string> src, tgt;
  int64_t size() const { return static_cast<int64_t>(src.size()); }
};

struct TrilingualCorpus {
  std::vector<std::string> src, piv, tgt;
  int64_t size() const { return static_cast<int64_t>(src.size()); }
};

// corpora live as one sentence per line in <base>.src / <base>.piv / <base>.tgt
ParallelCorpus read_parallel(const std::string& base);
void write_parallel(const std::string& base, const ParallelCorpus& corpus);
TrilingualCorpus read_trilingual(const std::string& base);
void write_trilingual(const std::string& base, const TrilingualCorpus& corpus);

Vocab build_vocab(std::span<const std::vector<std::string>* const> sides);

// Deterministic trilingual toy task. A latent id sequence v_1..v_L becomes
//   source  "s<v>"
//   pivot   "p<(v + shift_sp) % V>"
//   target  "t<(v + shift_pt) % V>", optionally reversed,
// so each mapping is learnable and the composition has an exact oracle.
struct SyntheticTaskSpec {
  int latent_vocab = 20;
  int len_min = 3;
  int len_max = 12;
  int shift_sp = 3;
  int shift_pt = 7;
  bool reverse_target = true;
  int64_t n_src_piv = 20000;
  int64_t n_piv_tgt = 20000;
  int64_t n_src_tgt = 800;
  uint64_t seed = 13;

  void validate() const;
};

class SyntheticTask {
 public:
  explicit SyntheticTask(SyntheticTaskSpec spec);

  const SyntheticTaskSpec& spec() const { return spec_; }

  std::string oracle_sp(const std::string& src_sentence) const;
  std::string oracle_pt(const std::string& piv_sentence) const;
  std::string oracle_st(const std::string& src_sentence) const;

  // n fresh (source, pivot, target) triples from a derived stream
  TrilingualCorpus sample_triples(int64_t n, uint64_t stream_seed) const;

 private:
  std::vector<int> parse(const std::string& sentence, char prefix, int unshift) const;
  SyntheticTaskSpec spec_;
};

struct SyntheticData {
  ParallelCorpus src_piv, piv_tgt, src_tgt;
};

SyntheticData generate_synthetic(const SyntheticTaskSpec& spec);

struct TokenizedPairs {
  std::vector<std::vector<int>> src, tgt;  // raw ids, no BOS/EOS
};

TokenizedPairs tokenize_pairs(const ParallelCorpus& corpus, const Vocab& src_vocab,
                              const Vocab& tgt_vocab);

struct Batch {
  std::vector<int64_t> indices;            // rows of the tokenized corpus
  std::vector<std::vector<int>> src, tgt;  // padded to the batch maximum with PAD
  int64_t src_tokens = 0, tgt_tokens = 0;  // counts before padding
};

// One epoch of length-bucketed batches; max_tokens caps rows * padded length
// per side. Seed fixes the shuffle, and every sentence appears exactly once.
std::vector<Batch> batch_iter(const TokenizedPairs& pairs, int64_t max_tokens, uint64_t seed);

}  // namespace pnmt
