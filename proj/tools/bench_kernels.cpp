// Times the serial reference kernels against the OpenMP entry points and
// checks that both produce bit-identical output.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "pnmt/kernels.hpp"
#include "pnmt/rng.hpp"

namespace {

using clk = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = clk::now();
  for (int r = 0; r < reps; ++r) fn();
  auto t1 = clk::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void fill(std::vector<double>& v, pnmt::Rng& rng) {
  for (auto& x : v) x = rng.normal(0.0, 1.0);
}

}  // namespace

int main() {
  pnmt::Rng rng(7);
  std::printf("%-22s %10s %10s %8s %6s\n", "kernel", "serial ms", "openmp ms", "speedup",
              "equal");

  for (int64_t n : {64, 128, 256}) {
    std::vector<double> a(static_cast<size_t>(n * n)), b(a), cs(a), cp(a);
    fill(a, rng);
    fill(b, rng);
    const int reps = n <= 128 ? 50 : 10;
    double ts = time_ms([&] { pnmt::kern::serial::matmul(n, n, n, a.data(), b.data(), cs.data()); }, reps);
    double tp = time_ms([&] { pnmt::kern::matmul(n, n, n, a.data(), b.data(), cp.data()); }, reps);
    char name[32];
    std::snprintf(name, sizeof name, "matmul %lldx%lldx%lld", static_cast<long long>(n),
                  static_cast<long long>(n), static_cast<long long>(n));
    std::printf("%-22s %10.3f %10.3f %7.2fx %6s\n", name, ts, tp, ts / tp,
                bitwise_equal(cs, cp) ? "yes" : "NO");
  }

  {
    const int64_t rows = 512, cols = 512;
    std::vector<double> x(static_cast<size_t>(rows * cols)), ys(x), yp(x);
    fill(x, rng);
    double ts = time_ms([&] { pnmt::kern::serial::softmax_rows(rows, cols, x.data(), ys.data()); }, 50);
    double tp = time_ms([&] { pnmt::kern::softmax_rows(rows, cols, x.data(), yp.data()); }, 50);
    std::printf("%-22s %10.3f %10.3f %7.2fx %6s\n", "softmax 512x512", ts, tp, ts / tp,
                bitwise_equal(ys, yp) ? "yes" : "NO");
  }

  {
    const int64_t rows = 512, cols = 512;
    std::vector<double> x(static_cast<size_t>(rows * cols)), gain(cols, 1.0), bias(cols, 0.0);
    std::vector<double> ys(x), yp(x), xh(x), inv(static_cast<size_t>(rows));
    fill(x, rng);
    double ts = time_ms([&] {
      pnmt::kern::serial::layer_norm(rows, cols, x.data(), gain.data(), bias.data(), 1e-5,
                                     ys.data(), xh.data(), inv.data());
    }, 50);
    double tp = time_ms([&] {
      pnmt::kern::layer_norm(rows, cols, x.data(), gain.data(), bias.data(), 1e-5, yp.data(),
                             xh.data(), inv.data());
    }, 50);
    std::printf("%-22s %10.3f %10.3f %7.2fx %6s\n", "layer_norm 512x512", ts, tp, ts / tp,
                bitwise_equal(ys, yp) ? "yes" : "NO");
  }

  {
    const int64_t rows = 512, cols = 512;
    std::vector<double> x(static_cast<size_t>(rows * cols)), ys(x), yp(x);
    for (auto& v : x) v = rng.uniform(0.0, 1.0) + 1e-3;
    double ts = time_ms([&] { pnmt::kern::serial::renorm_rows(rows, cols, x.data(), 1.5, ys.data()); }, 50);
    double tp = time_ms([&] { pnmt::kern::renorm_rows(rows, cols, x.data(), 1.5, yp.data()); }, 50);
    std::printf("%-22s %10.3f %10.3f %7.2fx %6s\n", "renorm 512x512", ts, tp, ts / tp,
                bitwise_equal(ys, yp) ? "yes" : "NO");
  }

  return 0;
}
