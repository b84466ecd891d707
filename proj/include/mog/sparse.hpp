#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mog/errors.hpp"

namespace mog {

struct DenseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> values;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols)
      : n_rows(rows), n_cols(cols), values(rows * cols, 0.0) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> vals);

  double& at(std::size_t i, std::size_t j) { return values[i * n_cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * n_cols + j]; }

  bool operator==(const DenseMatrix&) const = default;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Canonical CSR matrix: per row, column indices strictly increasing,
/// no duplicates, no stored non-finite values.
struct SparseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_offsets;  // length n_rows + 1
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  SparseMatrix() : row_offsets(1, 0) {}

  /// Builds canonical CSR from (row, col, value) triplets. Duplicate cells
  /// are summed in insertion order; exact zeros are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix zero(std::size_t rows, std::size_t cols);
  /// Dense to sparse; entries with |v| <= prune are dropped.
  static SparseMatrix from_dense(const DenseMatrix& d, double prune = 0.0);

  std::size_t nnz() const { return values.size(); }
  /// Stored value at (i, j), 0 for structural zeros. Binary search per row.
  double get(std::size_t i, std::size_t j) const;

  bool operator==(const SparseMatrix&) const = default;
};

DenseMatrix to_dense(const SparseMatrix& m);

/// Exact sparse * dense product.
DenseMatrix spmm_sd(const SparseMatrix& a, const DenseMatrix& b);

/// Canonical sparse * sparse product (Gustavson row accumulation).
SparseMatrix spmm_ss(const SparseMatrix& a, const SparseMatrix& b);

/// Entrywise sum of weighted matrices; cancellation residue below 1e-15
/// in magnitude is pruned.
SparseMatrix add_scaled(std::span<const std::pair<double, const SparseMatrix*>> terms);
SparseMatrix add_scaled(const std::vector<std::pair<double, SparseMatrix>>& terms);

SparseMatrix transpose(const SparseMatrix& m);

/// m + m^T - diag(m). Mirrored cells receive bitwise-identical values.
SparseMatrix symmetrize(const SparseMatrix& m);

/// D^(-1/2) (m + I) D^(-1/2) with D the degree diagonal of m + I.
/// Requires a square, entrywise non-negative input; preserves exact
/// stored symmetry of symmetric inputs.
SparseMatrix sym_normalize(const SparseMatrix& m);

/// Row-wise softmax, stabilized by row-max subtraction.
DenseMatrix softmax_rows(const DenseMatrix& logits);

// Dense helpers used by the model and by test oracles.
DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix dense_transpose(const DenseMatrix& m);

std::string shape_string(std::size_t rows, std::size_t cols);

}  // namespace mog
