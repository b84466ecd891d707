#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mog/metapath_spec.hpp"
#include "mog/sparse.hpp"

namespace mog {

struct NodeType {
  int id = 0;
  std::string name;
  std::size_t count = 0;
  std::optional<DenseMatrix> features;

  bool operator==(const NodeType&) const = default;
};

struct RelationMatrix {
  int id = 0;
  std::string name;
  int src_type = 0;
  int dst_type = 0;
  SparseMatrix matrix;

  bool operator==(const RelationMatrix&) const = default;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  bool operator==(const Splits&) const = default;
};

/// Attributed heterogeneous graph with a designated target node type.
/// Labels use contiguous class ids 0..c-1; -1 marks unlabeled nodes.
struct HeteroGraph {
  std::vector<NodeType> node_types;
  std::vector<RelationMatrix> relations;
  int target_type = 0;
  int num_classes = 0;
  std::vector<int> labels;
  Splits splits;
  std::vector<MetaPathSpec> meta_paths;

  const NodeType& type(int id) const;
  const NodeType& target() const { return type(target_type); }
  std::size_t target_count() const { return target().count; }
  const DenseMatrix& target_features() const;
  const RelationMatrix& relation(int id) const;

  bool operator==(const HeteroGraph&) const = default;
};

/// Throws ValidationError naming the violated invariant.
void validate(const HeteroGraph& g);

/// Reads a dataset directory (manifest.json + TSV files) and validates it.
HeteroGraph load_dataset(const std::filesystem::path& dir);

/// Writes a graph in the load_dataset format (17-significant-digit reals).
void write_dataset(const HeteroGraph& g, const std::filesystem::path& dir);

struct RelationPlan {
  bool informative = true;  // informative: p_in > p_out; noisy: p_in == p_out
  std::size_t aux_count = 100;
  double p_in = 0.1;
  double p_out = 0.01;
};

struct SynthConfig {
  std::size_t n_target = 300;
  int num_classes = 3;
  int feature_dim = 8;
  double feature_noise = 1.0;
  std::vector<RelationPlan> relations;
  std::array<double, 3> split_ratios{0.2, 0.1, 0.1};
};

/// Seeded generator of planted-partition heterogeneous graphs. Target nodes
/// get class-centroid + Gaussian-noise features; informative relations wire
/// targets to same-class auxiliary nodes with probability p_in (p_out
/// otherwise), so the induced R R^T meta-path has planted communities.
/// Also fills meta_paths with the R_i R_i^T chain per relation.
HeteroGraph generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

/// Seeded disjoint index sets of sizes floor(ratio * n).
Splits split_nodes(std::size_t n, double train_ratio, double val_ratio, double test_ratio,
                   std::uint64_t seed);

}  // namespace mog
