#pragma once

#include <cstdint>

// The dense inner loops behind the tape ops. Every kernel exists twice:
// the serial reference under kern::serial, and the default entry points,
// which split the row loop across OpenMP threads. Both call the same
// per-row helpers, so outputs are bit-identical for any thread count.
// tools/bench_kernels compares the two.

namespace pnmt::kern {

namespace serial {
void matmul(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
            bool accumulate = false);
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
               bool accumulate = false);
// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
               bool accumulate = false);
void softmax_rows(int64_t rows, int64_t cols, const double* x, double* y);
void softmax_rows_backward(int64_t rows, int64_t cols, const double* y, const double* dy,
                           double* dx_acc);
void layer_norm(int64_t rows, int64_t cols, const double* x, const double* gain,
                const double* bias, double eps, double* y, double* xhat, double* inv_std);
void layer_norm_backward(int64_t rows, int64_t cols, const double* dy, const double* gain,
                         const double* xhat, const double* inv_std, double* dx_acc,
                         double* dgain_acc, double* dbias_acc);
void relu(int64_t n, const double* x, double* y);
void relu_backward(int64_t n, const double* x, const double* dy, double* dx_acc);
// row-wise p^alpha / sum(p^alpha); caller guarantees a positive row sum
void renorm_rows(int64_t rows, int64_t cols, const double* x, double alpha, double* y);
void renorm_rows_backward(int64_t rows, int64_t cols, const double* x, const double* y,
                          const double* dy, double alpha, double* dx_acc);
}  // namespace serial

void matmul(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
            bool accumulate = false);
void matmul_nt(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
               bool accumulate = false);
void matmul_tn(int64_t m, int64_t k, int64_t n, const double* a, const double* b, double* c,
               bool accumulate = false);
void softmax_rows(int64_t rows, int64_t cols, const double* x, double* y);
void softmax_rows_backward(int64_t rows, int64_t cols, const double* y, const double* dy,
                           double* dx_acc);
void layer_norm(int64_t rows, int64_t cols, const double* x, const double* gain,
                const double* bias, double eps, double* y, double* xhat, double* inv_std);
void layer_norm_backward(int64_t rows, int64_t cols, const double* dy, const double* gain,
                         const double* xhat, const double* inv_std, double* dx_acc,
                         double* dgain_acc, double* dbias_acc);
void relu(int64_t n, const double* x, double* y);
void relu_backward(int64_t n, const double* x, const double* dy, double* dx_acc);
void renorm_rows(int64_t rows, int64_t cols, const double* x, double alpha, double* y);
void renorm_rows_backward(int64_t rows, int64_t cols, const double* x, const double* y,
                          const double* dy, double alpha, double* dx_acc);

}  // namespace pnmt::kern
