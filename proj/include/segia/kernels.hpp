#pragma once

// Data-parallel building blocks shared by the surrogate, the reverse-convolution
// generator and the attack gradient. The functions in `segia::kernels` run under
// OpenMP (one output row per iteration, so results do not depend on the thread
// count). `segia::kernels::reference` holds the plain serial versions that the
// tests and the benchmark compare against.

#include "segia/matrix.hpp"

namespace segia::kernels {

/// a * x for sparse a.
Matrix spmm(const CsrMatrix& a, const Matrix& x);
/// a * b.
Matrix gemm(const Matrix& a, const Matrix& b);
/// a^T * b.
Matrix gemm_tn(const Matrix& a, const Matrix& b);
/// a * b^T.
Matrix gemm_nt(const Matrix& a, const Matrix& b);
/// Elementwise max(x, 0).
Matrix relu(const Matrix& x);

namespace reference {
Matrix spmm(const CsrMatrix& a, const Matrix& x);
Matrix gemm(const Matrix& a, const Matrix& b);
Matrix gemm_tn(const Matrix& a, const Matrix& b);
Matrix gemm_nt(const Matrix& a, const Matrix& b);
Matrix relu(const Matrix& x);
}  // namespace reference

}  // namespace segia::kernels
