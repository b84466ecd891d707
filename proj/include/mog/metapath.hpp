#pragma once

#include <span>
#include <string>
#include <vector>

#include "mog/hetero.hpp"
#include "mog/metapath_spec.hpp"
#include "mog/sparse.hpp"

namespace mog {

/// The L first-order meta-path adjacency matrices over the target node
/// type: square, symmetric, renormalized (entries in [0, 1]).
struct FirstOrderSet {
  std::vector<SparseMatrix> matrices;
  std::vector<std::string> names;

  std::size_t size() const { return matrices.size(); }
};

/// Per order l = 1..L, the lexicographically ordered l-subsets of
/// {0, ..., L-1}, each subset ascending.
struct SubsetEnumeration {
  std::vector<std::vector<std::vector<int>>> per_order;

  int max_order() const { return static_cast<int>(per_order.size()); }
  std::size_t branch_count() const;
  /// Branches flattened in (l ascending, t ascending) order.
  std::vector<std::pair<int, std::vector<int>>> branches() const;
};

/// Everything build_high_order computes for one (t, l) branch; factors and
/// intermediates are kept for the analytic backward pass.
struct BranchBuild {
  std::vector<int> subset;              // ascending first-order indices
  int order = 0;                        // l = subset size
  std::vector<SparseMatrix> factors;    // alpha-mixed factors, subset order
  SparseMatrix product;                 // left-to-right factor product
  SparseMatrix normalized;              // sym_normalize(symmetrize(product))
};

struct HighOrderBasis {
  std::vector<BranchBuild> branches;  // (l ascending, t ascending)
};

/// Composes the chain's relation matrices, symmetrizes and renormalizes.
SparseMatrix compose_first_order(const HeteroGraph& g, const MetaPathSpec& spec);

FirstOrderSet build_first_order_set(const HeteroGraph& g,
                                    std::span<const MetaPathSpec> specs);

SubsetEnumeration enumerate_subsets(int max_order);

/// Product of alpha-mixed factors over `basis` (Pi_i sum_j alpha[i][j] A_j),
/// then symmetrize and sym_normalize. alpha must be row-stochastic l x l.
BranchBuild build_high_order_detailed(std::span<const SparseMatrix* const> basis,
                                      const DenseMatrix& alpha);
SparseMatrix build_high_order(std::span<const SparseMatrix* const> basis,
                              const DenseMatrix& alpha);

/// One l x l alpha per branch, in (l ascending, t ascending) order.
HighOrderBasis assemble_basis(const FirstOrderSet& first, const SubsetEnumeration& enumeration,
                              std::span<const DenseMatrix> alphas);

/// Convex beta-weighted sum of the branch adjacency matrices.
SparseMatrix aggregate_multi_order(const HighOrderBasis& basis, std::span<const double> beta);

/// Human-readable branch name, e.g. "M0*M2".
std::string branch_name(const FirstOrderSet& first, std::span<const int> subset);

}  // namespace mog
