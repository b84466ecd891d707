#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "mog/sparse.hpp"

namespace mog {

enum class Similarity { cosine, gaussian };

Similarity similarity_from_string(const std::string& s);
std::string to_string(Similarity s);

/// Binary symmetric top-k attribute-similarity graph with zero diagonal.
struct SemanticAdjacency {
  SparseMatrix matrix;
  std::size_t k = 0;
  Similarity metric = Similarity::cosine;
};

/// Full n x n similarity matrix. Cosine maps zero feature rows to
/// similarity 0; gaussian is exp(-||xi - xj||^2 / (2 bandwidth^2)).
/// The diagonal is set to -infinity so a node never selects itself.
DenseMatrix pairwise_similarity(const DenseMatrix& x, Similarity metric,
                                std::optional<double> bandwidth = std::nullopt);

/// Edge (i, j) = 1 iff j is among i's k most similar nodes or vice versa.
/// Ties at the k-th position resolve to the lower node index.
SemanticAdjacency build_semantic_adjacency(const DenseMatrix& x, std::size_t k,
                                           Similarity metric,
                                           std::optional<double> bandwidth = std::nullopt);

struct RecLoss {
  double value = 0.0;
  bool empty_support = false;  // no semantic connections to supervise
};

/// -(1/kappa) sum over A_S support of log(max(entry, 1e-12)).
RecLoss rec_loss(const SparseMatrix& multi_order, const SemanticAdjacency& sem);

/// Log clamp used by rec_loss and its gradient.
inline constexpr double kRecLossEpsilon = 1e-12;

}  // namespace mog
