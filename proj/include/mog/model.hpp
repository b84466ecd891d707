#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mog/hetero.hpp"
#include "mog/metapath.hpp"
#include "mog/semantic.hpp"
#include "mog/sparse.hpp"

namespace mog {

/// Trainable parameters, stored as unconstrained logits; softmax projects
/// alpha rows and beta onto the simplex at forward time.
struct ModelParams {
  std::vector<DenseMatrix> alpha_logits;  // one l x l matrix per branch
  std::vector<double> beta_logits;        // one entry per branch
  DenseMatrix w;                          // feature_dim x num_classes
  std::uint64_t version = 0;

  void bump() { ++version; }

  /// Seeded init: alpha logits iid U[0,1), W iid U(+-sqrt(6/(f+c))),
  /// beta logits zero (uniform simplex start).
  static ModelParams init(const SubsetEnumeration& enumeration, std::size_t feature_dim,
                          std::size_t num_classes, std::uint64_t seed);
};

/// Mixture override for baselines: alphas/beta are used as-is (no softmax)
/// and receive no gradient.
struct FixedMixture {
  std::vector<DenseMatrix> alphas;
  std::vector<double> beta;
};

struct ForwardCache {
  std::vector<DenseMatrix> alphas;  // row-stochastic, per branch
  std::vector<double> beta;         // simplex point
  HighOrderBasis basis;
  SparseMatrix multi_order;
  DenseMatrix ax;     // multi_order * X
  DenseMatrix z_raw;  // multi_order * X * W
  DenseMatrix z;      // row-softmax(z_raw)
  std::uint64_t params_version = 0;
  bool mixture_fixed = false;
};

ForwardCache forward(const ModelParams& params, const HeteroGraph& g, const FirstOrderSet& first,
                     const SubsetEnumeration& enumeration,
                     const FixedMixture* fixed = nullptr);

/// -sum over the train set of ln Z[i][y_i].
double ce_loss(const ForwardCache& cache, std::span<const int> labels,
               std::span<const std::size_t> train_set);

/// ce_loss + gamma * rec_loss; sem may be null when gamma is 0.
double total_loss(const ForwardCache& cache, std::span<const int> labels,
                  std::span<const std::size_t> train_set, const SemanticAdjacency* sem,
                  double gamma);

struct Gradients {
  DenseMatrix w;
  std::vector<double> beta_logits;
  std::vector<DenseMatrix> alpha_logits;
};

/// Analytic gradients of total_loss for W, beta logits and alpha logits.
/// The cache must come from forward() on the same (unmutated) params.
/// For a fixed-mixture cache, alpha/beta gradients are zero.
Gradients backward(const ForwardCache& cache, const ModelParams& params, const HeteroGraph& g,
                   std::span<const int> labels, std::span<const std::size_t> train_set,
                   const SemanticAdjacency* sem, double gamma);

struct GroupCheck {
  double max_rel = 0.0;
  double mean_rel = 0.0;
};

struct FdReport {
  GroupCheck w;
  GroupCheck beta;
  GroupCheck alpha;

  double worst() const;
};

/// Central-difference check of backward() over every coordinate.
FdReport finite_diff_check(const ModelParams& params, const HeteroGraph& g,
                           const FirstOrderSet& first, const SubsetEnumeration& enumeration,
                           const SemanticAdjacency* sem, double gamma, double step);

struct Checkpoint {
  int max_order = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::uint64_t config_hash = 0;
  std::vector<std::string> first_order_names;
  ModelParams params;
  std::optional<FixedMixture> fixed_mixture;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over a canonical config string; stored in checkpoints.
std::uint64_t fnv1a_hash(const std::string& s);

}  // namespace mog
