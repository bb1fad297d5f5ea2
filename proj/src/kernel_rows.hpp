#pragma once

#include <cmath>
#include <cstdint>

// Per-row bodies shared by the serial and OpenMP kernel entry points.
// Keeping one definition of the arithmetic guarantees the two backends
// produce bit-identical results.

namespace pnmt::kern::rows {

inline void matmul_row(int64_t i, int64_t k, int64_t n, const double* a, const double* b,
                       double* c, bool accumulate) {
  double* ci = c + i * n;
  if (!accumulate)
    for (int64_t j = 0; j < n; ++j) ci[j] = 0.0;
  const double* ai = a + i * k;
  for (int64_t p = 0; p < k; ++p) {
    const double aip = ai[p];
    const double* bp = b + p * n;
    for (int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
  }
}

inline void matmul_nt_row(int64_t i, int64_t k, int64_t n, const double* a, const double* b,
                          double* c, bool accumulate) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (int64_t j = 0; j < n; ++j) {
    const double* bj = b + j * k;
    double acc = 0.0;
    for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] = accumulate ? ci[j] + acc : acc;
  }
}

inline void matmul_tn_row(int64_t i, int64_t k, int64_t m, int64_t n, const double* a,
                          const double* b, double* c, bool accumulate) {
  (void)m;
  double* ci = c + i * n;
  if (!accumulate)
    for (int64_t j = 0; j < n; ++j) ci[j] = 0.0;
  for (int64_t p = 0; p < k; ++p) {
    const double api = a[p * m + i];
    const double* bp = b + p * n;
    for (int64_t j = 0; j < n; ++j) ci[j] += api * bp[j];
  }
}

inline void softmax_row(int64_t cols, const double* x, double* y) {
  double mx = x[0];
  for (int64_t j = 1; j < cols; ++j) mx = x[j] > mx ? x[j] : mx;
  double sum = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (int64_t j = 0; j < cols; ++j) y[j] *= inv;
}

// dx_j += y_j * (dy_j - sum_k dy_k y_k)
inline void softmax_row_backward(int64_t cols, const double* y, const double* dy,
                                 double* dx_acc) {
  double dot = 0.0;
  for (int64_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
  for (int64_t j = 0; j < cols; ++j) dx_acc[j] += y[j] * (dy[j] - dot);
}

inline void layer_norm_row(int64_t cols, const double* x, const double* gain,
                           const double* bias, double eps, double* y, double* xhat,
                           double* inv_std) {
  double mean = 0.0;
  for (int64_t j = 0; j < cols; ++j) mean += x[j];
  mean /= static_cast<double>(cols);
  double var = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    const double d = x[j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(cols);
  const double inv = 1.0 / std::sqrt(var + eps);
  *inv_std = inv;
  for (int64_t j = 0; j < cols; ++j) {
    xhat[j] = (x[j] - mean) * inv;
    y[j] = gain[j] * xhat[j] + bias[j];
  }
}

// dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
// with dxhat = dy .* gain; the two means come from d(mean)/dx and d(var)/dx.
inline void layer_norm_row_backward(int64_t cols, const double* dy, const double* gain,
                                    const double* xhat, double inv_std, double* dx_acc) {
  double m1 = 0.0, m2 = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    const double dxh = dy[j] * gain[j];
    m1 += dxh;
    m2 += dxh * xhat[j];
  }
  m1 /= static_cast<double>(cols);
  m2 /= static_cast<double>(cols);
  for (int64_t j = 0; j < cols; ++j) {
    const double dxh = dy[j] * gain[j];
    dx_acc[j] += inv_std * (dxh - m1 - xhat[j] * m2);
  }
}

inline void renorm_row(int64_t cols, const double* x, double alpha, double* y) {
  double sum = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    y[j] = std::pow(x[j], alpha);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (int64_t j = 0; j < cols; ++j) y[j] *= inv;
}

// y_j = x_j^a / S  =>  dx_i += a x_i^(a-1) / S * (dy_i - sum_j dy_j y_j)
inline void renorm_row_backward(int64_t cols, const double* x, const double* y,
                                const double* dy, double alpha, double* dx_acc) {
  double sum = 0.0, dot = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    sum += std::pow(x[j], alpha);
    dot += dy[j] * y[j];
  }
  for (int64_t j = 0; j < cols; ++j) {
    const double p = x[j] > 0.0 ? alpha * std::pow(x[j], alpha - 1.0) / sum : 0.0;
    dx_acc[j] += p * (dy[j] - dot);
  }
}

}  // namespace pnmt::kern::rows
