#include "mog/metapath.hpp"

#include <cmath>

namespace mog {

SparseMatrix compose_first_order(const HeteroGraph& g, const MetaPathSpec& spec) {
  if (spec.chain.empty()) throw SpecError("meta-path '" + spec.name + "': empty chain");
  SparseMatrix acc;
  int current_type = g.target_type;
  for (std::size_t s = 0; s < spec.chain.size(); ++s) {
    const auto& step = spec.chain[s];
    const auto& rel = g.relation(step.relation);
    int step_src = step.transpose ? rel.dst_type : rel.src_type;
    int step_dst = step.transpose ? rel.src_type : rel.dst_type;
    if (step_src != current_type) {
      throw SpecError("meta-path '" + spec.name + "': step " + std::to_string(s) +
                      " starts at type " + std::to_string(step_src) + " but chain is at type " +
                      std::to_string(current_type));
    }
    SparseMatrix m = step.transpose ? transpose(rel.matrix) : rel.matrix;
    acc = (s == 0) ? std::move(m) : spmm_ss(acc, m);
    current_type = step_dst;
  }
  if (current_type != g.target_type) {
    throw SpecError("meta-path '" + spec.name + "': chain ends at type " +
                    std::to_string(current_type) + ", not the target type");
  }
  return sym_normalize(symmetrize(acc));
}

FirstOrderSet build_first_order_set(const HeteroGraph& g, std::span<const MetaPathSpec> specs) {
  if (specs.empty()) throw ArgumentError("build_first_order_set: no meta-path specs");
  FirstOrderSet out;
  for (const auto& spec : specs) {
    out.matrices.push_back(compose_first_order(g, spec));
    out.names.push_back(spec.name);
  }
  return out;
}

std::size_t SubsetEnumeration::branch_count() const {
  std::size_t total = 0;
  for (const auto& order : per_order) total += order.size();
  return total;
}

std::vector<std::pair<int, std::vector<int>>> SubsetEnumeration::branches() const {
  std::vector<std::pair<int, std::vector<int>>> out;
  for (std::size_t l = 0; l < per_order.size(); ++l) {
    for (const auto& subset : per_order[l]) out.emplace_back(static_cast<int>(l + 1), subset);
  }
  return out;
}

SubsetEnumeration enumerate_subsets(int max_order) {
  if (max_order < 1) throw ArgumentError("enumerate_subsets: max order must be >= 1");
  SubsetEnumeration e;
  e.per_order.resize(static_cast<std::size_t>(max_order));
  for (int l = 1; l <= max_order; ++l) {
    auto& list = e.per_order[static_cast<std::size_t>(l - 1)];
    std::vector<int> subset(static_cast<std::size_t>(l));
    for (int i = 0; i < l; ++i) subset[static_cast<std::size_t>(i)] = i;
    while (true) {
      list.push_back(subset);
      // Next combination in lexicographic order.
      int i = l - 1;
      while (i >= 0 && subset[static_cast<std::size_t>(i)] == max_order - l + i) --i;
      if (i < 0) break;
      ++subset[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < l; ++j) {
        subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
  }
  return e;
}

BranchBuild build_high_order_detailed(std::span<const SparseMatrix* const> basis,
                                      const DenseMatrix& alpha) {
  const std::size_t l = basis.size();
  if (l == 0) throw ArgumentError("build_high_order: empty basis");
  if (alpha.n_rows != l || alpha.n_cols != l) {
    throw ShapeError("build_high_order: alpha shape " + shape_string(alpha.n_rows, alpha.n_cols) +
                     " for " + std::to_string(l) + " basis matrices");
  }
  for (std::size_t i = 0; i < l; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < l; ++j) row_sum += alpha.at(i, j);
    if (std::abs(row_sum - 1.0) > 1e-9) {
      throw ArgumentError("build_high_order: alpha row " + std::to_string(i) + " sums to " +
                          std::to_string(row_sum));
    }
  }
  const std::size_t n = basis[0]->n_rows;
  for (const auto* m : basis) {
    if (m->n_rows != n || m->n_cols != n) {
      throw ShapeError("build_high_order: basis matrices must be square with one shape");
    }
  }
  BranchBuild b;
  b.order = static_cast<int>(l);
  for (std::size_t i = 0; i < l; ++i) {
    std::vector<std::pair<double, const SparseMatrix*>> terms;
    for (std::size_t j = 0; j < l; ++j) terms.emplace_back(alpha.at(i, j), basis[j]);
    b.factors.push_back(add_scaled(std::span<const std::pair<double, const SparseMatrix*>>(terms)));
  }
  b.product = b.factors[0];
  for (std::size_t i = 1; i < l; ++i) b.product = spmm_ss(b.product, b.factors[i]);
  b.normalized = sym_normalize(symmetrize(b.product));
  return b;
}

SparseMatrix build_high_order(std::span<const SparseMatrix* const> basis,
                              const DenseMatrix& alpha) {
  return build_high_order_detailed(basis, alpha).normalized;
}

HighOrderBasis assemble_basis(const FirstOrderSet& first, const SubsetEnumeration& enumeration,
                              std::span<const DenseMatrix> alphas) {
  auto branches = enumeration.branches();
  if (alphas.size() != branches.size()) {
    throw ArgumentError("assemble_basis: " + std::to_string(alphas.size()) + " alphas for " +
                        std::to_string(branches.size()) + " branches");
  }
  HighOrderBasis basis;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto& subset = branches[b].second;
    std::vector<const SparseMatrix*> mats;
    for (int idx : subset) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= first.size()) {
        throw ArgumentError("assemble_basis: subset index " + std::to_string(idx) +
                            " outside first-order set");
      }
      mats.push_back(&first.matrices[static_cast<std::size_t>(idx)]);
    }
    BranchBuild built = build_high_order_detailed(
        std::span<const SparseMatrix* const>(mats), alphas[b]);
    built.subset = subset;
    basis.branches.push_back(std::move(built));
  }
  return basis;
}

SparseMatrix aggregate_multi_order(const HighOrderBasis& basis, std::span<const double> beta) {
  if (beta.size() != basis.branches.size()) {
    throw ArgumentError("aggregate_multi_order: " + std::to_string(beta.size()) +
                        " weights for " + std::to_string(basis.branches.size()) + " branches");
  }
  double sum = 0.0;
  for (double w : beta) {
    if (w < 0.0) throw ArgumentError("aggregate_multi_order: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ArgumentError("aggregate_multi_order: weights sum to " + std::to_string(sum));
  }
  std::vector<std::pair<double, const SparseMatrix*>> terms;
  for (std::size_t b = 0; b < beta.size(); ++b) {
    terms.emplace_back(beta[b], &basis.branches[b].normalized);
  }
  return add_scaled(std::span<const std::pair<double, const SparseMatrix*>>(terms));
}

std::string branch_name(const FirstOrderSet& first, std::span<const int> subset) {
  std::string name;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i) name += "*";
    name += first.names[static_cast<std::size_t>(subset[i])];
  }
  return name;
}

}  // namespace mog
