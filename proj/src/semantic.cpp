#include "mog/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mog {

Similarity similarity_from_string(const std::string& s) {
  if (s == "cosine") return Similarity::cosine;
  if (s == "gaussian") return Similarity::gaussian;
  throw ArgumentError("unknown similarity metric '" + s + "'");
}

std::string to_string(Similarity s) {
  return s == Similarity::cosine ? "cosine" : "gaussian";
}

DenseMatrix pairwise_similarity(const DenseMatrix& x, Similarity metric,
                                std::optional<double> bandwidth) {
  if (x.n_rows == 0) throw ArgumentError("pairwise_similarity: empty feature matrix");
  if (metric == Similarity::gaussian) {
    if (!bandwidth) throw ArgumentError("pairwise_similarity: gaussian metric needs a bandwidth");
    if (*bandwidth <= 0.0) throw ArgumentError("pairwise_similarity: bandwidth must be positive");
  }
  const std::size_t n = x.n_rows;
  const std::size_t f = x.n_cols;
  DenseMatrix sim(n, n);
  if (metric == Similarity::cosine) {
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < f; ++j) s += x.at(i, j) * x.at(i, j);
      norms[i] = std::sqrt(s);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double v = 0.0;
        if (norms[i] > 0.0 && norms[j] > 0.0) {
          double dot = 0.0;
          for (std::size_t d = 0; d < f; ++d) dot += x.at(i, d) * x.at(j, d);
          v = dot / (norms[i] * norms[j]);
        }
        sim.at(i, j) = v;
        sim.at(j, i) = v;
      }
    }
  } else {
    double denom = 2.0 * (*bandwidth) * (*bandwidth);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double dist2 = 0.0;
        for (std::size_t d = 0; d < f; ++d) {
          double diff = x.at(i, d) - x.at(j, d);
          dist2 += diff * diff;
        }
        double v = std::exp(-dist2 / denom);
        sim.at(i, j) = v;
        sim.at(j, i) = v;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    sim.at(i, i) = -std::numeric_limits<double>::infinity();
  }
  return sim;
}

SemanticAdjacency build_semantic_adjacency(const DenseMatrix& x, std::size_t k,
                                           Similarity metric, std::optional<double> bandwidth) {
  const std::size_t n = x.n_rows;
  if (k < 1 || k >= n) {
    throw ArgumentError("build_semantic_adjacency: k must satisfy 1 <= k < n, got k=" +
                        std::to_string(k) + ", n=" + std::to_string(n));
  }
  DenseMatrix sim = pairwise_similarity(x, metric, bandwidth);
  std::vector<Triplet> triplets;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     order.end(), [&](std::size_t a, std::size_t b) {
                       double sa = sim.at(i, a), sb = sim.at(i, b);
                       return sa != sb ? sa > sb : a < b;
                     });
    for (std::size_t r = 0; r < k; ++r) {
      std::size_t j = order[r];
      if (j == i) continue;  // unreachable: diagonal is -inf
      std::size_t a = std::min(i, j), b = std::max(i, j);
      triplets.push_back({a, b, 1.0});
      triplets.push_back({b, a, 1.0});
    }
  }
  // Union semantics: duplicate selections collapse to a single unit edge.
  SparseMatrix m = SparseMatrix::from_triplets(n, n, std::move(triplets));
  for (double& v : m.values) v = 1.0;
  SemanticAdjacency out;
  out.matrix = std::move(m);
  out.k = k;
  out.metric = metric;
  return out;
}

RecLoss rec_loss(const SparseMatrix& multi_order, const SemanticAdjacency& sem) {
  const SparseMatrix& s = sem.matrix;
  if (multi_order.n_rows != s.n_rows || multi_order.n_cols != s.n_cols) {
    throw ShapeError("rec_loss: shapes " + shape_string(multi_order.n_rows, multi_order.n_cols) +
                     " vs " + shape_string(s.n_rows, s.n_cols));
  }
  std::size_t kappa = s.nnz();
  if (kappa == 0) return {0.0, true};
  double total = 0.0;
  for (std::size_t i = 0; i < s.n_rows; ++i) {
    for (std::size_t k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k) {
      double a = multi_order.get(i, s.col_indices[k]);
      total += std::log(std::max(a, kRecLossEpsilon));
    }
  }
  return {-total / static_cast<double>(kappa), false};
}

}  // namespace mog
