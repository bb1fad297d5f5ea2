#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "pnmt/rng.hpp"
#include "pnmt/tape.hpp"

using namespace pnmt;

namespace {

Tensor random_tensor(const Shape& shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t(shape);
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// keeps relu inputs away from the kink so finite differences stay clean
Tensor random_tensor_off_zero(const Shape& shape, uint64_t seed) {
  Tensor t = random_tensor(shape, seed);
  for (auto& x : t.data)
    if (std::abs(x) < 0.05) x += x < 0 ? -0.1 : 0.1;
  return t;
}

}  // namespace

TEST_CASE("softmax forward matches the known values") {
  Tape t;
  Val x = t.leaf(Tensor({1, 3}, {1, 2, 3}));
  Val y = t.softmax_rows(x);
  auto d = t.data(y);
  CHECK(d[0] == doctest::Approx(0.09003057317038046).epsilon(1e-14));
  CHECK(d[1] == doctest::Approx(0.24472847105479767).epsilon(1e-14));
  CHECK(d[2] == doctest::Approx(0.6652409557748219).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one") {
  Tape t;
  Val x = t.leaf(random_tensor({50, 37}, 5));
  Val y = t.softmax_rows(x);
  auto d = t.data(y);
  for (int i = 0; i < 50; ++i) {
    double s = 0.0;
    for (int j = 0; j < 37; ++j) s += d[i * 37 + j];
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("softmax is symmetric and survives extreme logits") {
  Tape t;
  auto u = t.data(t.softmax_rows(t.leaf(Tensor({1, 3}, {0, 0, 0}))));
  for (int j = 0; j < 3; ++j) CHECK(u[j] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  auto e = t.data(t.softmax_rows(t.leaf(Tensor({1, 2}, {1000, 0}))));
  CHECK(std::isfinite(e[0]));
  CHECK(std::isfinite(e[1]));
  CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e[1] < 1e-300);
}

TEST_CASE("cross entropy of uniform logits is ln(vocab)") {
  Tape t;
  Val logits = t.leaf(Tensor({1, 4}, {0.7, 0.7, 0.7, 0.7}));
  Val loss = t.cross_entropy(logits, std::vector<int>{2}, 0.0, 0);
  CHECK(t.scalar(loss) == doctest::Approx(1.3862943611198906).epsilon(1e-14));
}

TEST_CASE("cross entropy matches the smoothed definition computed directly") {
  const int rows = 3, vocab = 7;
  const double ls = 0.1;
  const int pad = 0;
  Tensor logits = random_tensor({rows, vocab}, 17, -2.0, 2.0);
  std::vector<int> targets = {4, pad, 6};

  Tape t;
  Val lv = t.leaf(logits);
  double got = t.scalar(t.cross_entropy(lv, targets, ls, pad));

  double want = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (targets[r] == pad) continue;
    const double* row = logits.data.data() + r * vocab;
    double mx = row[0];
    for (int v = 1; v < vocab; ++v) mx = std::max(mx, row[v]);
    double z = 0.0;
    for (int v = 0; v < vocab; ++v) z += std::exp(row[v] - mx);
    for (int v = 0; v < vocab; ++v) {
      double q = ls / vocab + (v == targets[r] ? 1.0 - ls : 0.0);
      double logp = row[v] - mx - std::log(z);
      want -= q * logp;
    }
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("cross entropy is zero for a certain prediction and for all-pad targets") {
  Tape t;
  Val sure = t.leaf(Tensor({1, 3}, {1000, 0, 0}));
  CHECK(t.scalar(t.cross_entropy(sure, std::vector<int>{0}, 0.0, -1)) == 0.0);

  Val any = t.leaf(random_tensor({3, 4}, 29));
  CHECK(t.scalar(t.cross_entropy(any, std::vector<int>{0, 0, 0}, 0.1, 0)) == 0.0);
}

TEST_CASE("pad rows contribute neither loss nor gradient") {
  const int vocab = 5, pad = 0;
  Tensor logits = random_tensor({2, vocab}, 23);
  logits.requires_grad = true;

  Tape t;
  Val lv = t.leaf(logits, true);
  Val loss = t.cross_entropy(lv, std::vector<int>{3, pad}, 0.1, pad);
  t.backward(loss);
  auto g = t.grad(lv);

  Tensor row0({1, vocab});
  std::copy_n(logits.data.begin(), vocab, row0.data.begin());
  Tape t2;
  double solo = t2.scalar(t2.cross_entropy(t2.leaf(row0), std::vector<int>{3}, 0.1, pad));

  CHECK(t.scalar(loss) == doctest::Approx(solo).epsilon(1e-14));
  for (int v = 0; v < vocab; ++v) CHECK(g[vocab + v] == 0.0);
}

TEST_CASE("gradient check: composite network") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Tensor x = random_tensor_off_zero({3, 4}, 1000 + seed);
    Tensor w1 = random_tensor({4, 5}, 2000 + seed);
    Tensor b1 = random_tensor_off_zero({5}, 3000 + seed);
    Tensor gain = random_tensor({5}, 4000 + seed, 0.5, 1.5);
    Tensor bias = random_tensor({5}, 5000 + seed);
    Tensor mask = random_tensor({3, 5}, 6000 + seed);

    auto f = [&](Tape& t, Val xv) {
      Val h = t.matmul(xv, t.leaf(w1));
      h = t.add_rowvec(h, t.leaf(b1));
      h = t.relu(h);
      h = t.layer_norm(h, t.leaf(gain), t.leaf(bias));
      Val s = t.softmax_rows(h);
      Val r = t.renorm_rows(s, 1.7);
      return t.sum(t.mul_elem(r, t.leaf(mask)));
    };
    auto rep = grad_check(f, x);
    INFO("seed ", seed, " max_rel_err ", rep.max_rel_err);
    CHECK(rep.passed);
  }
}

TEST_CASE("gradient check: cross entropy with smoothing") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Tensor x = random_tensor({4, 6}, 7000 + seed, -2.0, 2.0);
    std::vector<int> targets = {1, 0, 5, 3};
    auto f = [&](Tape& t, Val xv) { return t.cross_entropy(xv, targets, 0.1, 0); };
    auto rep = grad_check(f, x);
    INFO("seed ", seed, " max_rel_err ", rep.max_rel_err);
    CHECK(rep.passed);
  }
}

TEST_CASE("gradient check: weights as the differentiated input") {
  Tensor w = random_tensor({4, 3}, 71);
  Tensor a = random_tensor({2, 4}, 72);
  Tensor m = random_tensor({2, 3}, 73);
  auto f = [&](Tape& t, Val wv) {
    return t.sum(t.mul_elem(t.matmul(t.leaf(a), wv), t.leaf(m)));
  };
  CHECK(grad_check(f, w).passed);

  // matmul_nt consumes the second operand in transposed layout
  auto g = [&](Tape& t, Val wv) {
    return t.sum(t.mul_elem(t.matmul_nt(t.leaf(a), wv), t.leaf(m)));
  };
  Tensor w_nt = random_tensor({3, 4}, 74);
  CHECK(grad_check(g, w_nt).passed);
}

TEST_CASE("gradient check: slicing, concatenation and scaling") {
  Tensor x = random_tensor({3, 6}, 81);
  Tensor m = random_tensor({3, 7}, 82);
  auto f = [&](Tape& t, Val xv) {
    Val left = t.slice_cols(xv, 0, 2);
    Val mid = t.slice_cols(xv, 2, 3);
    Val right = t.mul_scalar(t.slice_cols(xv, 4, 2), -0.5);
    const Val parts[] = {left, mid, right};
    Val cat = t.concat_cols(parts);
    return t.sum(t.mul_elem(cat, t.leaf(m)));
  };
  CHECK(grad_check(f, x).passed);
}

TEST_CASE("gradient check: sum has exact unit gradient") {
  Tensor x = random_tensor({3, 3}, 61);
  auto rep = grad_check([](Tape& t, Val xv) { return t.sum(xv); }, x);
  CHECK(rep.passed);
  CHECK(rep.max_rel_err < 1e-10);
}

TEST_CASE("gradient check: squared renormalization") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Tensor x = random_tensor({2, 5}, 8000 + seed, 0.05, 1.0);
    Tensor w = random_tensor({2, 5}, 9000 + seed);
    auto f = [&](Tape& t, Val xv) {
      return t.sum(t.mul_elem(t.renorm_rows(xv, 2.0), t.leaf(w)));
    };
    CHECK(grad_check(f, x).passed);
  }
}

TEST_CASE("gradient check: a value reused by several consumers") {
  Tensor x = random_tensor({3, 4}, 91);
  Tensor w = random_tensor({4, 4}, 92);
  auto f = [&](Tape& t, Val xv) {
    Val y = t.matmul(xv, t.leaf(w));
    Val sq = t.mul_elem(y, y);
    Val both = t.axpby(2.0, y, -3.0, sq);
    return t.sum(both);
  };
  CHECK(grad_check(f, x).passed);
}

TEST_CASE("repeated backward calls accumulate gradients exactly") {
  Tensor x = random_tensor({2, 3}, 101);
  x.requires_grad = true;

  Tape once;
  Val xv1 = once.leaf(x, true);
  Val l1 = once.sum(once.mul_elem(xv1, xv1));
  once.backward(l1);
  auto g1 = once.grad(xv1);

  Tape twice;
  Val xv2 = twice.leaf(x, true);
  Val l2 = twice.sum(twice.mul_elem(xv2, xv2));
  twice.backward(l2);
  twice.backward(l2);
  auto g2 = twice.grad(xv2);

  REQUIRE(g1.size() == g2.size());
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == 2.0 * g1[i]);
}

TEST_CASE("renorm gradient is zero at exactly-zero entries") {
  Tape t;
  Val x = t.leaf(Tensor({1, 3}, {0.0, 1.0, 1.0}), true);
  Val y = t.renorm_rows(x, 1.5);
  Val w = t.leaf(Tensor({1, 3}, {1.0, 2.0, 3.0}));
  t.backward(t.sum(t.mul_elem(y, w)));
  auto g = t.grad(x);
  // y = [0, 1/2, 1/2]; dot = 2.5; dx_i = 1.5 * x_i^0.5 / 2 * (w_i - 2.5)
  CHECK(g[0] == 0.0);
  CHECK(g[1] == doctest::Approx(-0.375).epsilon(1e-14));
  CHECK(g[2] == doctest::Approx(0.375).epsilon(1e-14));
}

TEST_CASE("dropout scales survivors and is a no-op in eval mode") {
  Tensor x = random_tensor({4, 8}, 111, 0.5, 1.5);
  x.requires_grad = true;

  Tape train(42, true, true);
  Val xv = train.leaf(x, true);
  Val y = train.dropout(xv, 0.5);
  auto d = train.data(y);
  auto xd = train.data(xv);
  int zeros = 0;
  for (size_t i = 0; i < d.size(); ++i) {
    bool dropped = d[i] == 0.0;
    bool kept = d[i] == 2.0 * xd[i];
    CHECK((dropped || kept));
    zeros += dropped;
  }
  CHECK(zeros > 0);
  CHECK(zeros < 32);
  train.backward(train.sum(y));
  auto g = train.grad(xv);
  for (size_t i = 0; i < g.size(); ++i) CHECK(g[i] == (d[i] == 0.0 ? 0.0 : 2.0));

  Tape eval(42, true, false);
  Val ev = eval.leaf(x, true);
  CHECK(eval.dropout(ev, 0.5).i == ev.i);
}

TEST_CASE("parameters alias their tensor, leaves copy it") {
  Tensor p = random_tensor({2, 2}, 121);
  p.requires_grad = true;
  Tape t;
  Val pv = t.param(p);
  Val lv = t.leaf(p);
  p.data[0] = 99.0;
  CHECK(t.data(pv)[0] == 99.0);
  CHECK(t.data(lv)[0] != 99.0);
}

TEST_CASE("shape errors name both operands") {
  Tape t;
  Val a = t.leaf(Tensor({2, 3}));
  Val b = t.leaf(Tensor({4, 5}));
  try {
    t.matmul(a, b);
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x5]") != std::string::npos);
  }
}

TEST_CASE("contract violations throw") {
  Tape t;
  Val m = t.leaf(Tensor({2, 2}), true);
  CHECK_THROWS_AS(t.scalar(m), std::logic_error);
  CHECK_THROWS_AS(t.backward(m), std::logic_error);

  Tape nograd(0, false, false);
  Val x = nograd.leaf(Tensor({1}), true);
  CHECK_THROWS_AS(nograd.backward(x), std::logic_error);

  CHECK_THROWS_AS(t.renorm_rows(t.leaf(Tensor({1, 2}, {0.5, -0.1})), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(t.renorm_rows(t.leaf(Tensor({1, 2}, {0.0, 0.0})), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(t.cross_entropy(t.leaf(Tensor({1, 3})), std::vector<int>{7}, 0.0, 0),
                  std::out_of_range);
}
