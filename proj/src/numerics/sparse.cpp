#include "tcgu/numerics/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "tcgu/numerics/kernels.hpp"

namespace tcgu {

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> entries) {
  for (const auto& t : entries) {
    if (t.row >= rows || t.col >= cols) throw DimensionError("triplet outside matrix bounds");
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_ptr_.assign(rows + 1, 0);
  m.col_idx_.reserve(entries.size());
  m.values_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = entries[i];
    if (!m.col_idx_.empty() && i > 0 && entries[i - 1].row == t.row && entries[i - 1].col == t.col) {
      m.values_.back() += t.value;
      continue;
    }
    m.col_idx_.push_back(t.col);
    m.values_.push_back(t.value);
    ++m.row_ptr_[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

CsrMatrix CsrMatrix::from_dense(const Tensor& dense, double drop_below) {
  std::vector<Triplet> entries;
  for (std::size_t i = 0; i < dense.rows(); ++i)
    for (std::size_t j = 0; j < dense.cols(); ++j)
      if (const double v = dense(i, j); std::abs(v) > drop_below)
        entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), v});
  return from_triplets(dense.rows(), dense.cols(), std::move(entries));
}

Tensor CsrMatrix::multiply(const Tensor& x) const {
  if (x.rows() != cols_) throw DimensionError("spmm: inner dimension mismatch");
  const auto& k = kernels::active();
  Tensor out(rows_, x.cols());
  const std::size_t w = x.cols();
  for (std::size_t i = 0; i < rows_; ++i) {
    double* dst = out.data().data() + i * w;
    for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      k.axpy(values_[p], x.data().data() + col_idx_[p] * w, dst, w);
    }
  }
  return out;
}

Tensor CsrMatrix::multiply_transposed(const Tensor& x) const {
  if (x.rows() != rows_) throw DimensionError("spmm^T: inner dimension mismatch");
  const auto& k = kernels::active();
  Tensor out(cols_, x.cols());
  const std::size_t w = x.cols();
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* src = x.data().data() + i * w;
    for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      k.axpy(values_[p], src, out.data().data() + col_idx_[p] * w, w);
    }
  }
  return out;
}

CsrMatrix CsrMatrix::transposed() const {
  std::vector<Triplet> entries;
  entries.reserve(nnz());
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
      entries.push_back({col_idx_[p], static_cast<std::uint32_t>(i), values_[p]});
  return from_triplets(cols_, rows_, std::move(entries));
}

Tensor CsrMatrix::to_dense() const {
  Tensor out(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) out(i, col_idx_[p]) += values_[p];
  return out;
}

std::vector<double> CsrMatrix::row_sums() const {
  std::vector<double> s(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) s[i] += values_[p];
  return s;
}

bool CsrMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  const CsrMatrix t = transposed();
  if (t.nnz() != nnz()) return false;
  for (std::size_t i = 0; i < nnz(); ++i) {
    if (t.col_idx_[i] != col_idx_[i] || std::abs(t.values_[i] - values_[i]) > tol) return false;
  }
  return t.row_ptr_ == row_ptr_;
}

}  // namespace tcgu
