#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "pnmt/data.hpp"

using namespace pnmt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("pnmt_data_test_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("vocab reserves the first four ids") {
  Vocab v;
  CHECK(v.size() == 4);
  CHECK(v.token(kPadId) == "<pad>");
  CHECK(v.token(kBosId) == "<s>");
  CHECK(v.token(kEosId) == "</s>");
  CHECK(v.token(kUnkId) == "<unk>");
  CHECK(v.add("hello") == 4);
  CHECK(v.add("world") == 5);
  CHECK(v.add("hello") == 4);
  CHECK(v.id("hello") == 4);
  CHECK(v.id("nope") == kUnkId);
  CHECK_THROWS_AS(v.token(99), std::out_of_range);
}

TEST_CASE("vocab encode/decode round-trips corpus sentences") {
  Vocab v;
  for (const char* t : {"a", "b", "c", "dd"}) v.add(t);
  const std::string s = "a dd b b c";
  CHECK(v.decode(v.encode(s)) == s);
  CHECK(v.encode("a zz")[1] == kUnkId);
}

TEST_CASE("vocab save/load keeps ids stable") {
  TempDir dir;
  Vocab v;
  for (const char* t : {"x1", "x2", "x3"}) v.add(t);
  v.save(dir / "vocab.txt");

  std::ifstream in(dir / "vocab.txt");
  std::string first;
  std::getline(in, first);
  CHECK(first == "x1");  // line k holds id k + 4

  Vocab w = Vocab::load(dir / "vocab.txt");
  CHECK(w.size() == v.size());
  CHECK(w.id("x2") == v.id("x2"));
}

TEST_CASE("parallel corpus round-trips and validates") {
  TempDir dir;
  ParallelCorpus c;
  c.src = {"a b", "c"};
  c.tgt = {"x", "y z"};
  write_parallel(dir / "toy", c);
  ParallelCorpus r = read_parallel(dir / "toy");
  CHECK(r.src == c.src);
  CHECK(r.tgt == c.tgt);

  std::ofstream(dir / "bad.src") << "a\nb\n";
  std::ofstream(dir / "bad.tgt") << "x\n";
  CHECK_THROWS_WITH_AS(read_parallel(dir / "bad"), doctest::Contains("has 2 lines"),
                       std::runtime_error);

  std::ofstream(dir / "empty.src") << "a\n\nc\n";
  std::ofstream(dir / "empty.tgt") << "x\ny\nz\n";
  CHECK_THROWS_WITH_AS(read_parallel(dir / "empty"), doctest::Contains("line 2"),
                       std::runtime_error);
}

TEST_CASE("trilingual corpus round-trips") {
  TempDir dir;
  TrilingualCorpus c;
  c.src = {"s1 s2"};
  c.piv = {"p4 p5"};
  c.tgt = {"t11"};
  write_trilingual(dir / "tri", c);
  TrilingualCorpus r = read_trilingual(dir / "tri");
  CHECK(r.src == c.src);
  CHECK(r.piv == c.piv);
  CHECK(r.tgt == c.tgt);
}

TEST_CASE("synthetic task reproduces the worked example") {
  SyntheticTask task({});  // defaults: vocab 20, shifts 3/7, reversed target
  CHECK(task.oracle_sp("s4 s9") == "p7 p12");
  CHECK(task.oracle_st("s4 s9") == "t16 t11");
  CHECK(task.oracle_pt("p7 p12") == "t16 t11");
}

TEST_CASE("synthetic generation is deterministic with the requested sizes") {
  SyntheticTaskSpec spec;
  spec.n_src_piv = 50;
  spec.n_piv_tgt = 40;
  spec.n_src_tgt = 30;
  SyntheticData a = generate_synthetic(spec);
  SyntheticData b = generate_synthetic(spec);
  CHECK(a.src_piv.size() == 50);
  CHECK(a.piv_tgt.size() == 40);
  CHECK(a.src_tgt.size() == 30);
  CHECK(a.src_piv.src == b.src_piv.src);
  CHECK(a.src_piv.tgt == b.src_piv.tgt);
  CHECK(a.src_tgt.tgt == b.src_tgt.tgt);

  spec.seed = 14;
  SyntheticData c = generate_synthetic(spec);
  CHECK(a.src_piv.src != c.src_piv.src);
}

TEST_CASE("oracle triangle commutes on generated data") {
  SyntheticTaskSpec spec;
  spec.n_src_piv = 30;
  spec.n_piv_tgt = 0;
  spec.n_src_tgt = 30;
  SyntheticTask task(spec);
  SyntheticData d = generate_synthetic(spec);
  for (int64_t i = 0; i < d.src_piv.size(); ++i) {
    CHECK(task.oracle_sp(d.src_piv.src[i]) == d.src_piv.tgt[i]);
    CHECK(task.oracle_pt(d.src_piv.tgt[i]) == task.oracle_st(d.src_piv.src[i]));
  }
  for (int64_t i = 0; i < d.src_tgt.size(); ++i)
    CHECK(task.oracle_st(d.src_tgt.src[i]) == d.src_tgt.tgt[i]);
}

TEST_CASE("zero shifts and identity transform relabel the source") {
  SyntheticTaskSpec spec;
  spec.shift_sp = 0;
  spec.shift_pt = 0;
  spec.reverse_target = false;
  SyntheticTask task(spec);
  CHECK(task.oracle_sp("s3 s1") == "p3 p1");
  CHECK(task.oracle_st("s3 s1") == "t3 t1");
}

TEST_CASE("lengths stay inside the configured range") {
  SyntheticTaskSpec spec;
  spec.len_min = 3;
  spec.len_max = 12;
  SyntheticTask task(spec);
  auto tri = task.sample_triples(200, 99);
  for (const auto& s : tri.src) {
    auto n = split_tokens(s).size();
    CHECK(n >= 3);
    CHECK(n <= 12);
  }
}

TEST_CASE("build_vocab keeps first-seen order after the reserved block") {
  std::vector<std::string> a = {"b a", "c"};
  std::vector<std::string> b = {"a d"};
  const std::vector<std::string>* sides[] = {&a, &b};
  Vocab v = build_vocab(sides);
  CHECK(v.id("b") == 4);
  CHECK(v.id("a") == 5);
  CHECK(v.id("c") == 6);
  CHECK(v.id("d") == 7);
}

TEST_CASE("batches cover the corpus exactly once and respect the budget") {
  SyntheticTaskSpec spec;
  spec.n_src_piv = 300;
  SyntheticData d = generate_synthetic(spec);
  const std::vector<std::string>* src_sides[] = {&d.src_piv.src};
  const std::vector<std::string>* tgt_sides[] = {&d.src_piv.tgt};
  Vocab sv = build_vocab(src_sides), tv = build_vocab(tgt_sides);
  TokenizedPairs pairs = tokenize_pairs(d.src_piv, sv, tv);

  const int64_t budget = 64;
  auto batches = batch_iter(pairs, budget, 7);

  std::set<int64_t> seen;
  for (const auto& b : batches) {
    const auto rows = static_cast<int64_t>(b.indices.size());
    REQUIRE(rows > 0);
    int64_t src_max = 0;
    for (const auto& s : b.src) src_max = std::max<int64_t>(src_max, s.size());
    CHECK(rows * src_max <= budget);
    for (const auto& s : b.src) CHECK(static_cast<int64_t>(s.size()) == src_max);
    for (size_t r = 0; r < b.indices.size(); ++r) {
      CHECK(seen.insert(b.indices[r]).second);
      // padded row must reproduce the original after stripping PAD
      std::vector<int> stripped;
      for (int id : b.src[r])
        if (id != kPadId) stripped.push_back(id);
      CHECK(stripped == pairs.src[static_cast<size_t>(b.indices[r])]);
    }
  }
  CHECK(static_cast<int64_t>(seen.size()) == d.src_piv.size());

  auto again = batch_iter(pairs, budget, 7);
  REQUIRE(again.size() == batches.size());
  for (size_t i = 0; i < batches.size(); ++i) CHECK(again[i].indices == batches[i].indices);
  auto other = batch_iter(pairs, budget, 8);
  bool same = other.size() == batches.size();
  if (same)
    for (size_t i = 0; i < batches.size(); ++i)
      if (other[i].indices != batches[i].indices) same = false;
  CHECK(!same);
}

TEST_CASE("batch_iter rejects sentences over the budget") {
  TokenizedPairs pairs;
  pairs.src = {{5, 6, 7, 8, 9}};
  pairs.tgt = {{5}};
  CHECK_THROWS_WITH_AS(batch_iter(pairs, 4, 1), doctest::Contains("sentence 0"),
                       std::invalid_argument);
}
