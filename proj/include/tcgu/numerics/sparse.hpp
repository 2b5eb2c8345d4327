#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tcgu/numerics/tensor.hpp"

namespace tcgu {

struct Triplet {
  std::uint32_t row;
  std::uint32_t col;
  double value;
};

/// Compressed sparse row matrix; used for propagation over large graphs.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  /// Duplicate coordinates are summed. Entries are sorted by column per row.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
  static CsrMatrix from_dense(const Tensor& dense, double drop_below = 0.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::uint32_t>& col_idx() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// this * x
  Tensor multiply(const Tensor& x) const;
  /// this^T * x
  Tensor multiply_transposed(const Tensor& x) const;
  CsrMatrix transposed() const;
  Tensor to_dense() const;
  /// Row i entry sum.
  std::vector<double> row_sums() const;
  bool is_symmetric(double tol = 0.0) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace tcgu
