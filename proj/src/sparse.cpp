#include "mog/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mog {

namespace {
constexpr double kCancellationPrune = 1e-15;

void check_finite_triplets(const std::vector<Triplet>& triplets) {
  for (const auto& t : triplets) {
    if (!std::isfinite(t.value)) {
      throw DomainError("sparse matrix entry at (" + std::to_string(t.row) + ", " +
                        std::to_string(t.col) + ") is not finite");
    }
  }
}
}  // namespace

std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> vals)
    : n_rows(rows), n_cols(cols), values(std::move(vals)) {
  if (values.size() != n_rows * n_cols) {
    throw ShapeError("dense value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(n_rows, n_cols));
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  check_finite_triplets(triplets);
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                       ") outside shape " + shape_string(rows, cols));
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Triplet& a, const Triplet& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });
  SparseMatrix m;
  m.n_rows = rows;
  m.n_cols = cols;
  m.row_offsets.assign(rows + 1, 0);
  std::size_t i = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    while (i < triplets.size() && triplets[i].row == r) {
      double sum = triplets[i].value;
      std::size_t c = triplets[i].col;
      ++i;
      while (i < triplets.size() && triplets[i].row == r && triplets[i].col == c) {
        sum += triplets[i].value;
        ++i;
      }
      if (sum != 0.0) {
        m.col_indices.push_back(c);
        m.values.push_back(sum);
      }
    }
    m.row_offsets[r + 1] = m.col_indices.size();
  }
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m;
  m.n_rows = m.n_cols = n;
  m.row_offsets.resize(n + 1);
  m.col_indices.resize(n);
  m.values.assign(n, 1.0);
  std::iota(m.col_indices.begin(), m.col_indices.end(), std::size_t{0});
  std::iota(m.row_offsets.begin(), m.row_offsets.end(), std::size_t{0});
  return m;
}

SparseMatrix SparseMatrix::zero(std::size_t rows, std::size_t cols) {
  SparseMatrix m;
  m.n_rows = rows;
  m.n_cols = cols;
  m.row_offsets.assign(rows + 1, 0);
  return m;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& d, double prune) {
  std::vector<Triplet> triplets;
  for (std::size_t i = 0; i < d.n_rows; ++i) {
    for (std::size_t j = 0; j < d.n_cols; ++j) {
      double v = d.at(i, j);
      if (std::abs(v) > prune) triplets.push_back({i, j, v});
    }
  }
  return from_triplets(d.n_rows, d.n_cols, std::move(triplets));
}

double SparseMatrix::get(std::size_t i, std::size_t j) const {
  auto begin = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
  auto end = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
  auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - col_indices.begin())];
}

DenseMatrix to_dense(const SparseMatrix& m) {
  DenseMatrix d(m.n_rows, m.n_cols);
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      d.at(i, m.col_indices[k]) = m.values[k];
    }
  }
  return d;
}

DenseMatrix spmm_sd(const SparseMatrix& a, const DenseMatrix& b) {
  if (a.n_cols != b.n_rows) {
    throw ShapeError("spmm_sd: " + shape_string(a.n_rows, a.n_cols) + " * " +
                     shape_string(b.n_rows, b.n_cols));
  }
  DenseMatrix out(a.n_rows, b.n_cols);
  for (std::size_t i = 0; i < a.n_rows; ++i) {
    double* out_row = &out.values[i * out.n_cols];
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
      double v = a.values[k];
      const double* b_row = &b.values[a.col_indices[k] * b.n_cols];
      for (std::size_t j = 0; j < b.n_cols; ++j) out_row[j] += v * b_row[j];
    }
  }
  return out;
}

SparseMatrix spmm_ss(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.n_cols != b.n_rows) {
    throw ShapeError("spmm_ss: " + shape_string(a.n_rows, a.n_cols) + " * " +
                     shape_string(b.n_rows, b.n_cols));
  }
  SparseMatrix out;
  out.n_rows = a.n_rows;
  out.n_cols = b.n_cols;
  out.row_offsets.assign(a.n_rows + 1, 0);
  std::vector<double> acc(b.n_cols, 0.0);
  std::vector<std::size_t> touched;
  std::vector<char> seen(b.n_cols, 0);
  for (std::size_t i = 0; i < a.n_rows; ++i) {
    touched.clear();
    for (std::size_t ka = a.row_offsets[i]; ka < a.row_offsets[i + 1]; ++ka) {
      double va = a.values[ka];
      std::size_t r = a.col_indices[ka];
      for (std::size_t kb = b.row_offsets[r]; kb < b.row_offsets[r + 1]; ++kb) {
        std::size_t j = b.col_indices[kb];
        if (!seen[j]) {
          seen[j] = 1;
          touched.push_back(j);
          acc[j] = 0.0;
        }
        acc[j] += va * b.values[kb];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t j : touched) {
      if (acc[j] != 0.0) {
        out.col_indices.push_back(j);
        out.values.push_back(acc[j]);
      }
      seen[j] = 0;
    }
    out.row_offsets[i + 1] = out.col_indices.size();
  }
  return out;
}

SparseMatrix add_scaled(std::span<const std::pair<double, const SparseMatrix*>> terms) {
  if (terms.empty()) throw ArgumentError("add_scaled: empty term list");
  std::size_t rows = terms[0].second->n_rows;
  std::size_t cols = terms[0].second->n_cols;
  for (const auto& [w, m] : terms) {
    if (m->n_rows != rows || m->n_cols != cols) {
      throw ShapeError("add_scaled: shape mismatch " + shape_string(rows, cols) + " vs " +
                       shape_string(m->n_rows, m->n_cols));
    }
  }
  SparseMatrix out;
  out.n_rows = rows;
  out.n_cols = cols;
  out.row_offsets.assign(rows + 1, 0);
  std::vector<double> acc(cols, 0.0);
  std::vector<std::size_t> touched;
  std::vector<char> seen(cols, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    touched.clear();
    for (const auto& [w, m] : terms) {
      for (std::size_t k = m->row_offsets[i]; k < m->row_offsets[i + 1]; ++k) {
        std::size_t j = m->col_indices[k];
        if (!seen[j]) {
          seen[j] = 1;
          touched.push_back(j);
          acc[j] = 0.0;
        }
        acc[j] += w * m->values[k];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t j : touched) {
      if (std::abs(acc[j]) >= kCancellationPrune) {
        out.col_indices.push_back(j);
        out.values.push_back(acc[j]);
      }
      seen[j] = 0;
    }
    out.row_offsets[i + 1] = out.col_indices.size();
  }
  return out;
}

SparseMatrix add_scaled(const std::vector<std::pair<double, SparseMatrix>>& terms) {
  std::vector<std::pair<double, const SparseMatrix*>> views;
  views.reserve(terms.size());
  for (const auto& [w, m] : terms) views.emplace_back(w, &m);
  return add_scaled(std::span<const std::pair<double, const SparseMatrix*>>(views));
}

SparseMatrix transpose(const SparseMatrix& m) {
  SparseMatrix out;
  out.n_rows = m.n_cols;
  out.n_cols = m.n_rows;
  out.row_offsets.assign(m.n_cols + 1, 0);
  for (std::size_t c : m.col_indices) ++out.row_offsets[c + 1];
  for (std::size_t r = 0; r < m.n_cols; ++r) out.row_offsets[r + 1] += out.row_offsets[r];
  out.col_indices.resize(m.nnz());
  out.values.resize(m.nnz());
  std::vector<std::size_t> cursor(out.row_offsets.begin(), out.row_offsets.end() - 1);
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      std::size_t pos = cursor[m.col_indices[k]]++;
      out.col_indices[pos] = i;
      out.values[pos] = m.values[k];
    }
  }
  return out;
}

SparseMatrix symmetrize(const SparseMatrix& m) {
  if (m.n_rows != m.n_cols) {
    throw ShapeError("symmetrize: non-square input " + shape_string(m.n_rows, m.n_cols));
  }
  std::vector<Triplet> triplets;
  triplets.reserve(2 * m.nnz());
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      std::size_t j = m.col_indices[k];
      triplets.push_back({i, j, m.values[k]});
      if (j != i) triplets.push_back({j, i, m.values[k]});
    }
  }
  // Row-major emission order makes mirrored cells sum in the same order,
  // so stored values of (i,j) and (j,i) are bitwise equal.
  return SparseMatrix::from_triplets(m.n_rows, m.n_cols, std::move(triplets));
}

SparseMatrix sym_normalize(const SparseMatrix& m) {
  if (m.n_rows != m.n_cols) {
    throw ShapeError("sym_normalize: non-square input " + shape_string(m.n_rows, m.n_cols));
  }
  for (double v : m.values) {
    if (v < 0.0) throw DomainError("sym_normalize: negative entry");
  }
  const std::size_t n = m.n_rows;
  // Degrees of m + I.
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) d += m.values[k];
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  // Compute upper-triangle values once and mirror them, keeping exact
  // stored symmetry for symmetric inputs.
  std::vector<Triplet> triplets;
  triplets.reserve(m.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool saw_diag = false;
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      std::size_t j = m.col_indices[k];
      if (j < i) continue;
      double base = m.values[k] + (j == i ? 1.0 : 0.0);
      double v = inv_sqrt_deg[i] * base * inv_sqrt_deg[j];
      triplets.push_back({i, j, v});
      if (j == i) {
        saw_diag = true;
      } else {
        triplets.push_back({j, i, v});
      }
    }
    if (!saw_diag) {
      double v = inv_sqrt_deg[i] * inv_sqrt_deg[i];
      triplets.push_back({i, i, v});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(triplets));
}

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  for (double v : logits.values) {
    if (!std::isfinite(v)) throw DomainError("softmax_rows: non-finite logit");
  }
  DenseMatrix out(logits.n_rows, logits.n_cols);
  for (std::size_t i = 0; i < logits.n_rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.n_cols; ++j) mx = std::max(mx, logits.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.n_cols; ++j) {
      double e = std::exp(logits.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < logits.n_cols; ++j) out.at(i, j) /= sum;
  }
  return out;
}

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.n_cols != b.n_rows) {
    throw ShapeError("dense_matmul: " + shape_string(a.n_rows, a.n_cols) + " * " +
                     shape_string(b.n_rows, b.n_cols));
  }
  DenseMatrix out(a.n_rows, b.n_cols);
  for (std::size_t i = 0; i < a.n_rows; ++i) {
    for (std::size_t k = 0; k < a.n_cols; ++k) {
      double v = a.at(i, k);
      if (v == 0.0) continue;
      const double* b_row = &b.values[k * b.n_cols];
      double* out_row = &out.values[i * out.n_cols];
      for (std::size_t j = 0; j < b.n_cols; ++j) out_row[j] += v * b_row[j];
    }
  }
  return out;
}

DenseMatrix dense_transpose(const DenseMatrix& m) {
  DenseMatrix out(m.n_cols, m.n_rows);
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    for (std::size_t j = 0; j < m.n_cols; ++j) out.at(j, i) = m.at(i, j);
  }
  return out;
}

}  // namespace mog
