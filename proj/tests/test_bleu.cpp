#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "pnmt/bleu.hpp"

using namespace pnmt;

TEST_CASE("identity corpus scores 100") {
  std::vector<std::string> hyps = {"a b c", "d e f g", "h"};
  BleuReport rep = bleu(hyps, hyps);
  CHECK(rep.bleu == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(rep.brevity_penalty == 1.0);
  CHECK(rep.precisions[0] == 1.0);
  CHECK(rep.precisions[1] == 1.0);
  CHECK(rep.precisions[2] == 1.0);
  CHECK(rep.hyp_length == rep.ref_length);
}

TEST_CASE("hand-evaluated brevity penalty example") {
  std::vector<std::string> hyps = {"a b c d"};
  std::vector<std::string> refs = {"a b c d e"};
  BleuReport rep = bleu(hyps, refs);
  for (int n = 0; n < 4; ++n) CHECK(rep.precisions[n] == 1.0);
  CHECK(rep.hyp_length == 4);
  CHECK(rep.ref_length == 5);
  CHECK(rep.brevity_penalty == doctest::Approx(std::exp(1.0 - 5.0 / 4.0)).epsilon(1e-12));
  CHECK(rep.bleu == doctest::Approx(77.88007830714049).epsilon(1e-11));
}

TEST_CASE("exponential smoothing of zero-match orders") {
  // 1-grams 2/3, 2-grams 0/2 -> 1/(2*2), 3-grams 0/1 -> 1/(4*1), no 4-grams
  std::vector<std::string> hyps = {"a b c"};
  std::vector<std::string> refs = {"a x c"};
  BleuReport rep = bleu(hyps, refs);
  CHECK(rep.precisions[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(rep.precisions[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(rep.precisions[2] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(rep.precisions[3] == 0.0);  // no 4-grams anywhere: order dropped
  CHECK(rep.brevity_penalty == 1.0);
  const double expected =
      100.0 * std::exp((std::log(2.0 / 3.0) + std::log(0.25) + std::log(0.25)) / 3.0);
  CHECK(rep.bleu == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero 4-gram corpus scores nonzero but below one with a match") {
  std::vector<std::string> refs = {"p q r s t u v w"};
  std::vector<std::string> none = {"p q r x t u v y"};  // no 4-gram survives
  std::vector<std::string> one = {"p q r s t u v y"};   // shares 4-grams with the reference
  BleuReport rep_none = bleu(none, refs);
  BleuReport rep_one = bleu(one, refs);
  CHECK(rep_none.bleu > 0.0);
  CHECK(rep_none.bleu < rep_one.bleu);
}

TEST_CASE("clipped counting caps repeated tokens") {
  std::vector<std::string> hyps = {"the the the the"};
  std::vector<std::string> refs = {"the cat"};
  BleuReport rep = bleu(hyps, refs);
  CHECK(rep.precisions[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("sentence order does not matter") {
  std::vector<std::string> hyps = {"a b c", "d e", "f g h i", "j", "k l m", "n o"};
  std::vector<std::string> refs = {"a b x", "d e", "f x h i", "j", "x l m", "n x"};
  BleuReport base = bleu(hyps, refs);
  std::vector<size_t> perm = {3, 0, 5, 2, 4, 1};
  std::vector<std::string> ph, pr;
  for (size_t i : perm) {
    ph.push_back(hyps[i]);
    pr.push_back(refs[i]);
  }
  BleuReport shuffled = bleu(ph, pr);
  CHECK(shuffled.bleu == doctest::Approx(base.bleu).epsilon(1e-12));
  CHECK(shuffled.hyp_length == base.hyp_length);
  CHECK(shuffled.ref_length == base.ref_length);
}

TEST_CASE("empty hypotheses score zero with zero brevity penalty") {
  std::vector<std::string> hyps = {"", ""};
  std::vector<std::string> refs = {"a b", "c"};
  BleuReport rep = bleu(hyps, refs);
  CHECK(rep.bleu == 0.0);
  CHECK(rep.brevity_penalty == 0.0);
  CHECK(rep.hyp_length == 0);
}

TEST_CASE("input validation") {
  std::vector<std::string> one = {"a"};
  std::vector<std::string> two = {"a", "b"};
  CHECK_THROWS_AS(bleu({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(bleu(one, two), std::invalid_argument);
}
