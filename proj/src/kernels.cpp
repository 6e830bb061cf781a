#include "segia/kernels.hpp"

#include <algorithm>
#include <cstdint>

#include "segia/error.hpp"

namespace segia::kernels {

namespace {

void check_spmm(const CsrMatrix& a, const Matrix& x) {
  if (a.cols() != x.rows()) throw DimensionError("spmm: inner dimensions differ");
}
void check_gemm(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("gemm: inner dimensions differ");
}
void check_gemm_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("gemm_tn: row counts differ");
}
void check_gemm_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("gemm_nt: column counts differ");
}

using sidx = std::int64_t;

}  // namespace

Matrix spmm(const CsrMatrix& a, const Matrix& x) {
  check_spmm(a, x);
  Matrix out(a.rows(), x.cols());
  const auto& ptr = a.row_ptr();
  const auto& idx = a.col_idx();
  const auto& val = a.values();
  const std::size_t d = x.cols();
  const sidx rows = static_cast<sidx>(a.rows());
#pragma omp parallel for schedule(dynamic, 64)
  for (sidx r = 0; r < rows; ++r) {
    double* dst = out.row(static_cast<std::size_t>(r)).data();
    for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) {
      const double w = val[k];
      const double* src = x.row(idx[k]).data();
      for (std::size_t j = 0; j < d; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

Matrix gemm(const Matrix& a, const Matrix& b) {
  check_gemm(a, b);
  Matrix out(a.rows(), b.cols());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  const sidx rows = static_cast<sidx>(a.rows());
#pragma omp parallel for schedule(static)
  for (sidx i = 0; i < rows; ++i) {
    double* dst = out.row(static_cast<std::size_t>(i)).data();
    const double* ai = a.row(static_cast<std::size_t>(i)).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double w = ai[k];
      if (w == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += w * bk[j];
    }
  }
  return out;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check_gemm_tn(a, b);
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  const std::size_t rows = a.rows();
  const sidx out_rows = static_cast<sidx>(a.cols());
  // Each output row i accumulates over the shared row index in a fixed order.
#pragma omp parallel for schedule(static)
  for (sidx i = 0; i < out_rows; ++i) {
    double* dst = out.row(static_cast<std::size_t>(i)).data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double w = a(r, static_cast<std::size_t>(i));
      if (w == 0.0) continue;
      const double* br = b.row(r).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += w * br[j];
    }
  }
  return out;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check_gemm_nt(a, b);
  Matrix out(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  const std::size_t n = b.rows();
  const sidx rows = static_cast<sidx>(a.rows());
#pragma omp parallel for schedule(static)
  for (sidx i = 0; i < rows; ++i) {
    const double* ai = a.row(static_cast<std::size_t>(i)).data();
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += ai[k] * bj[k];
      out(static_cast<std::size_t>(i), j) = s;
    }
  }
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  auto& v = out.values();
  const sidx n = static_cast<sidx>(v.size());
#pragma omp parallel for schedule(static)
  for (sidx i = 0; i < n; ++i) v[i] = std::max(v[i], 0.0);
  return out;
}

namespace reference {

Matrix spmm(const CsrMatrix& a, const Matrix& x) {
  check_spmm(a, x);
  Matrix out(a.rows(), x.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto cols = a.row_cols(r);
    auto vals = a.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) += vals[k] * x(cols[k], j);
    }
  }
  return out;
}

Matrix gemm(const Matrix& a, const Matrix& b) {
  check_gemm(a, b);
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check_gemm_tn(a, b);
  Matrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t i = 0; i < a.cols(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += a(r, i) * b(r, j);
  return out;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check_gemm_nt(a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(j, k);
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

}  // namespace reference

}  // namespace segia::kernels
