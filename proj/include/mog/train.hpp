#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mog/hetero.hpp"
#include "mog/metapath.hpp"
#include "mog/model.hpp"
#include "mog/semantic.hpp"

namespace mog {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::size_t step_count = 0;

  static AdamState init_like(const ModelParams& params);
};

/// One bias-corrected Adam update; bumps params.version.
void adam_step(AdamState& state, ModelParams& params, const Gradients& grads,
               const AdamConfig& cfg);

struct TrainConfig {
  double gamma = 0.1;
  std::size_t topk = 50;
  Similarity metric = Similarity::cosine;
  std::optional<double> bandwidth;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
  std::array<double, 3> split_ratios{0.2, 0.1, 0.1};
  AdamConfig adam;  // adam.lr is the learning rate
  std::optional<std::size_t> patience;

  /// Canonical JSON echo of the config (also hashed into checkpoints).
  std::string to_json() const;
};

struct EpochStats {
  double total = 0.0;
  double ce = 0.0;
  double rec = 0.0;
  double train_macro = 0.0;
  double train_micro = 0.0;
  double val_macro = 0.0;
  double val_micro = 0.0;
};

struct BranchInfo {
  int order = 0;
  std::vector<int> subset;
  std::string name;
};

struct RunRecord {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  std::vector<BranchInfo> branches;
  std::vector<double> beta;  // simplex at the best epoch
  double test_macro = 0.0;
  double test_micro = 0.0;
  // State needed to reproduce the reported test metrics.
  ModelParams best_params;
  std::optional<FixedMixture> fixed_mixture;
  std::vector<std::string> first_order_names;
};

/// Argmax predictions over `index_set`; returns (macro_f1, micro_f1).
/// Classes absent from both prediction and truth contribute F1 = 0.
std::pair<double, double> evaluate(const ForwardCache& cache, std::span<const int> labels,
                                   std::span<const std::size_t> index_set, int num_classes);
std::pair<double, double> f1_scores(std::span<const int> truth, std::span<const int> predicted,
                                    int num_classes);

/// Full training loop: builds the first-order set and semantic adjacency
/// once, then iterates forward / loss / backward / adam. Returns the run
/// with the best-validation-accuracy model restored.
RunRecord train(const HeteroGraph& g, std::span<const MetaPathSpec> specs,
                const TrainConfig& cfg);

struct BaselineChoice {
  bool uniform_fusion = false;  // otherwise: single meta-path `index`
  int index = 0;
};

/// Trains with alpha and beta frozen (one-hot single meta-path or uniform
/// fusion over the first-order branches); only W learns.
RunRecord run_fixed_metapath_baseline(const HeteroGraph& g, std::span<const MetaPathSpec> specs,
                                      const TrainConfig& cfg, const BaselineChoice& which);

/// Per-order sums of the beta simplex, indexed by l - 1.
std::vector<double> beta_mass_by_order(const RunRecord& record);

std::string run_record_json(const RunRecord& record, const TrainConfig& cfg);
void write_run_json(const RunRecord& record, const TrainConfig& cfg,
                    const std::filesystem::path& path);
void write_epoch_csv(const RunRecord& record, const std::filesystem::path& path);

Checkpoint make_checkpoint(const RunRecord& record, const TrainConfig& cfg,
                           std::size_t feature_dim, std::size_t num_classes);

}  // namespace mog
