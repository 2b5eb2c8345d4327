#pragma once

// Differentiable primitives. Elementwise binaries broadcast an operand whose
// row or column count is 1 (row vectors, column vectors, scalars); nothing
// more general is supported.

#include <cstddef>
#include <memory>
#include <span>

#include "tcgu/numerics/autodiff.hpp"
#include "tcgu/numerics/sparse.hpp"

namespace tcgu::ad {

/// Inputs to exp are clamped to [-kExpClamp, kExpClamp].
inline constexpr double kExpClamp = 40.0;
/// Sigmoid logits are clamped to [-kSigmoidClamp, kSigmoidClamp]. At 36 the
/// result is still strictly inside (0, 1) in double precision.
inline constexpr double kSigmoidClamp = 36.0;

Var matmul(const Var& a, const Var& b);
/// a * b^T without materialising the transpose.
Var matmul_nt(const Var& a, const Var& b);
/// Constant sparse matrix times x.
Var spmm(std::shared_ptr<const CsrMatrix> m, const Var& x);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var pow(const Var& a, double p);

Var sum(const Var& a);
Var mean(const Var& a);
/// Squared L2 / Frobenius norm.
Var sum_squares(const Var& a);
/// Nx1 vector of row sums.
Var row_sum(const Var& a);
/// 1xF vector of column sums.
Var col_sum(const Var& a);
Var col_mean(const Var& a);

Var concat_rows(std::span<const Var> parts);
Var index_rows(const Var& a, std::span<const std::size_t> rows);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);

Var row_softmax(const Var& a);
/// Mean over rows of -log softmax(logits)[label].
Var cross_entropy_with_logits(const Var& logits, std::span<const int> labels);

/// C(i,j) = cos(a_i, b_j). Pairs involving a zero-norm row are defined as 0.
Var cosine_similarity_matrix(const Var& a, const Var& b);
/// Subtracts the column mean from every row.
Var center_rows(const Var& a);
/// Row (i * v.rows() + j) = u_i + v_j.
Var pairwise_sum(const Var& u, const Var& v);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// Plain tensor helpers shared by the ops and by non-differentiable code.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);

}  // namespace tcgu::ad
