#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "pinncw/common.hpp"

namespace pinncw {

namespace detail_linalg {

// 8-row x 4-column register tile; every output element is a single fma chain
// over ascending k.
inline void tile8x4(const double* wcm, int rows, int cols, const double* acol0,
                    const double* acol1, const double* acol2,
                    const double* acol3, int i0, double* c0, double* c1,
                    double* c2, double* c3) {
  double acc0[8] = {}, acc1[8] = {}, acc2[8] = {}, acc3[8] = {};
  for (int k = 0; k < cols; ++k) {
    const double* wk = wcm + (std::size_t)k * rows + i0;
    const double a0 = acol0[k], a1 = acol1[k], a2 = acol2[k], a3 = acol3[k];
    for (int ii = 0; ii < 8; ++ii) acc0[ii] = std::fma(wk[ii], a0, acc0[ii]);
    for (int ii = 0; ii < 8; ++ii) acc1[ii] = std::fma(wk[ii], a1, acc1[ii]);
    for (int ii = 0; ii < 8; ++ii) acc2[ii] = std::fma(wk[ii], a2, acc2[ii]);
    for (int ii = 0; ii < 8; ++ii) acc3[ii] = std::fma(wk[ii], a3, acc3[ii]);
  }
  std::memcpy(c0 + i0, acc0, sizeof(acc0));
  std::memcpy(c1 + i0, acc1, sizeof(acc1));
  std::memcpy(c2 + i0, acc2, sizeof(acc2));
  std::memcpy(c3 + i0, acc3, sizeof(acc3));
}

inline double dot_colmajor(const double* wcm, int rows, int cols, int i,
                           const double* acol) {
  double acc = 0.0;
  for (int k = 0; k < cols; ++k)
    acc = std::fma(wcm[(std::size_t)k * rows + i], acol[k], acc);
  return acc;
}

}  // namespace detail_linalg

// Forward-path product C = W * A (W given row-major, A and C column-major,
// one point per column). Unlike a blocked GEMM, the accumulation order of
// every output element is fixed (ascending k, fused multiply-add), so each
// column's result is bit-identical no matter how the batch is composed or
// ordered. The full-tile path and the scalar cleanup compute the same chains.
inline void matmul_forward(const double* w_rowmajor, int rows, int cols,
                           const Mat& a, Mat& c) {
  check(a.rows() == cols, "matmul_forward: shape mismatch");
  const long n = a.cols();
  c.resize(rows, n);
  thread_local std::vector<double> wcm;
  wcm.resize((std::size_t)rows * cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k)
      wcm[(std::size_t)k * rows + i] = w_rowmajor[(std::size_t)i * cols + k];

  const int r8 = rows - rows % 8;
  const long n4 = n - n % 4;
  for (long j0 = 0; j0 < n4; j0 += 4) {
    const double* a0 = a.col(j0).data();
    const double* a1 = a.col(j0 + 1).data();
    const double* a2 = a.col(j0 + 2).data();
    const double* a3 = a.col(j0 + 3).data();
    double* c0 = c.col(j0).data();
    double* c1 = c.col(j0 + 1).data();
    double* c2 = c.col(j0 + 2).data();
    double* c3 = c.col(j0 + 3).data();
    for (int i0 = 0; i0 < r8; i0 += 8)
      detail_linalg::tile8x4(wcm.data(), rows, cols, a0, a1, a2, a3, i0, c0,
                             c1, c2, c3);
    for (int i = r8; i < rows; ++i) {
      c0[i] = detail_linalg::dot_colmajor(wcm.data(), rows, cols, i, a0);
      c1[i] = detail_linalg::dot_colmajor(wcm.data(), rows, cols, i, a1);
      c2[i] = detail_linalg::dot_colmajor(wcm.data(), rows, cols, i, a2);
      c3[i] = detail_linalg::dot_colmajor(wcm.data(), rows, cols, i, a3);
    }
  }
  for (long j = n4; j < n; ++j) {
    const double* acol = a.col(j).data();
    double* ccol = c.col(j).data();
    for (int i = 0; i < rows; ++i)
      ccol[i] = detail_linalg::dot_colmajor(wcm.data(), rows, cols, i, acol);
  }
}

}  // namespace pinncw
