#include "pnmt/kernels.hpp"

#include "kernel_rows.hpp"

// OpenMP entry points. Work is split by output row, each row computed by the
// same helper the serial backend uses, so results do not depend on the thread
// count. The `if` clauses keep tiny problems on one thread; nested calls from
// an already-parallel region (e.g. sentence-level training loops) run serial
// because nested parallelism stays disabled.

namespace pnmt::kern {

namespace {
constexpr int64_t kMatmulPar = int64_t(1) << 16;   // m*k*n threshold
constexpr int64_t kRowwisePar = int64_t(1) << 14;  // rows*cols threshold
}  // namespace

void matmul(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
            bool accumulate) {
#pragma omp parallel for schedule(static) if (m * k * n >= kMatmulPar)
  for (int64_t i = 0; i < m; ++i) rows::matmul_row(i, k, n, a, b, c, accumulate);
}

void matmul_nt(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
               bool accumulate) {
#pragma omp parallel for schedule(static) if (m * k * n >= kMatmulPar)
  for (int64_t i = 0; i < m; ++i) rows::matmul_nt_row(i, k, n, a, b, c, accumulate);
}

void matmul_tn(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
               bool accumulate) {
#pragma omp parallel for schedule(static) if (m * k * n >= kMatmulPar)
  for (int64_t i = 0; i < m; ++i) rows::matmul_tn_row(i, k, m, n, a, b, c, accumulate);
}

void softmax_rows(int64_t nrows, int64_t cols, const double* x, double* y) {
#pragma omp parallel for schedule(static) if (nrows * cols >= kRowwisePar)
  for (int64_t i = 0; i < nrows; ++i) rows::softmax_row(cols, x + i * cols, y + i * cols);
}

void softmax_rows_backward(int64_t nrows, int64_t cols, const double* y, const double* dy,
                           double* dx_acc) {
#pragma omp parallel for schedule(static) if (nrows * cols >= kRowwisePar)
  for (int64_t i = 0; i < nrows; ++i)
    rows::softmax_row_backward(cols, y + i * cols, dy + i * cols, dx_acc + i * cols);
}

void layer_norm(int64_t nrows, int64_t cols, const double* x, const double* gain,
                const double* bias, double eps, double* y, double* xhat, double* inv_std) {
#pragma omp parallel for schedule(static) if (nrows * cols >= kRowwisePar)
  for (int64_t i = 0; i < nrows; ++i)
    rows::layer_norm_row(cols, x + i * cols, gain, bias, eps, y + i * cols, xhat + i * cols,
                         inv_std + i);
}

void layer_norm_backward(int64_t nrows, int64_t cols, const double* dy, const double* gain,
                         const double* xhat, const double* inv_std, double* dx_acc,
                         double* dgain_acc, double* dbias_acc) {
#pragma omp parallel for schedule(static) if (nrows * cols >= kRowwisePar)
  for (int64_t i = 0; i < nrows; ++i)
    rows::layer_norm_row_backward(cols, dy + i * cols, gain, xhat + i * cols, inv_std[i],
                                  dx_acc + i * cols);
  // gain/bias reductions cross rows; keep them serial and in row order
  for (int64_t i = 0; i < nrows; ++i) {
    const double* dyi = dy + i * cols;
    const double* xh = xhat + i * cols;
    for (int64_t j = 0; j < cols; ++j) {
      dgain_acc[j] += dyi[j] * xh[j];
      dbias_acc[j] += dyi[j];
    }
  }
}

void relu(int64_t n, const double* x, double* y) {
#pragma omp parallel for schedule(static) if (n >= kRowwisePar)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(int64_t n, const double* x, const double* dy, double* dx_acc) {
#pragma omp parallel for schedule(static) if (n >= kRowwisePar)
  for (int64_t i = 0; i < n; ++i) dx_acc[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

void renorm_rows(int64_t nrows, int64_t cols, const double* x, double alpha, double* y) {
#pragma omp parallel for schedule(static) if (nrows * cols >= kRowwisePar)
  for (int64_t i = 0; i < nrows; ++i) rows::renorm_row(cols, x + i * cols, alpha, y + i * cols);
}

void renorm_rows_backward(int64_t nrows, int64_t cols, const double* x, const double* y,
                          const double* dy, double alpha, double* dx_acc) {
#pragma omp parallel for schedule(static) if (nrows * cols >= kRowwisePar)
  for (int64_t i = 0; i < nrows; ++i)
    rows::renorm_row_backward(cols, x + i * cols, y + i * cols, dy + i * cols, alpha,
                              dx_acc + i * cols);
}

}  // namespace pnmt::kern
