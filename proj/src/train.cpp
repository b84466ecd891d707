#include "mog/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace mog {

using nlohmann::json;

AdamState AdamState::init_like(const ModelParams& params) {
  AdamState s;
  auto zeros = [&]() {
    Gradients g;
    g.w = DenseMatrix(params.w.n_rows, params.w.n_cols);
    g.beta_logits.assign(params.beta_logits.size(), 0.0);
    for (const auto& a : params.alpha_logits) g.alpha_logits.emplace_back(a.n_rows, a.n_cols);
    return g;
  };
  s.m = zeros();
  s.v = zeros();
  return s;
}

namespace {

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamConfig& cfg, double bias1, double bias2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    double m_hat = m[i] / bias1;
    double v_hat = v[i] / bias2;
    param[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

}  // namespace

void adam_step(AdamState& state, ModelParams& params, const Gradients& grads,
               const AdamConfig& cfg) {
  if (grads.w.n_rows != params.w.n_rows || grads.w.n_cols != params.w.n_cols ||
      grads.beta_logits.size() != params.beta_logits.size() ||
      grads.alpha_logits.size() != params.alpha_logits.size()) {
    throw ContractError("adam_step: gradient shapes do not match parameters");
  }
  ++state.step_count;
  double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
  double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
  adam_update(params.w.values, grads.w.values, state.m.w.values, state.v.w.values, cfg, bias1,
              bias2);
  adam_update(params.beta_logits, grads.beta_logits, state.m.beta_logits, state.v.beta_logits,
              cfg, bias1, bias2);
  for (std::size_t b = 0; b < params.alpha_logits.size(); ++b) {
    if (grads.alpha_logits[b].values.size() != params.alpha_logits[b].values.size()) {
      throw ContractError("adam_step: alpha gradient shape mismatch at branch " +
                          std::to_string(b));
    }
    adam_update(params.alpha_logits[b].values, grads.alpha_logits[b].values,
                state.m.alpha_logits[b].values, state.v.alpha_logits[b].values, cfg, bias1,
                bias2);
  }
  params.bump();
}

std::pair<double, double> f1_scores(std::span<const int> truth, std::span<const int> predicted,
                                    int num_classes) {
  if (truth.empty() || truth.size() != predicted.size()) {
    throw ArgumentError("f1_scores: empty or mismatched label sets");
  }
  std::vector<std::size_t> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::size_t> fp(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::size_t> fn(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 ||
        predicted[i] >= num_classes) {
      throw ArgumentError("f1_scores: class id out of range at position " + std::to_string(i));
    }
    auto t = static_cast<std::size_t>(truth[i]);
    auto p = static_cast<std::size_t>(predicted[i]);
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  double macro = 0.0;
  std::size_t correct = 0;
  for (int c = 0; c < num_classes; ++c) {
    auto ci = static_cast<std::size_t>(c);
    std::size_t denom = 2 * tp[ci] + fp[ci] + fn[ci];
    macro += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[ci]) / static_cast<double>(denom);
    correct += tp[ci];
  }
  macro /= static_cast<double>(num_classes);
  double micro = static_cast<double>(correct) / static_cast<double>(truth.size());
  return {macro, micro};
}

std::pair<double, double> evaluate(const ForwardCache& cache, std::span<const int> labels,
                                   std::span<const std::size_t> index_set, int num_classes) {
  if (index_set.empty()) throw ArgumentError("evaluate: empty index set");
  std::vector<int> truth, predicted;
  truth.reserve(index_set.size());
  predicted.reserve(index_set.size());
  for (std::size_t i : index_set) {
    truth.push_back(labels[i]);
    std::size_t best = 0;
    for (std::size_t j = 1; j < cache.z.n_cols; ++j) {
      if (cache.z.at(i, j) > cache.z.at(i, best)) best = j;
    }
    predicted.push_back(static_cast<int>(best));
  }
  return f1_scores(truth, predicted, num_classes);
}

namespace {

RunRecord train_impl(const HeteroGraph& g, std::span<const MetaPathSpec> specs,
                     const TrainConfig& cfg, const std::optional<FixedMixture>& fixed) {
  if (cfg.epochs < 1) throw ArgumentError("train: epochs must be >= 1");
  if (cfg.gamma < 0.0) throw ArgumentError("train: gamma must be >= 0");
  if (cfg.adam.lr <= 0.0) throw ArgumentError("train: learning rate must be positive");

  FirstOrderSet first = build_first_order_set(g, specs);
  const int max_order = static_cast<int>(first.size());
  SubsetEnumeration enumeration = enumerate_subsets(max_order);
  const DenseMatrix& x = g.target_features();

  std::optional<SemanticAdjacency> sem;
  if (cfg.gamma > 0.0) {
    sem = build_semantic_adjacency(x, cfg.topk, cfg.metric, cfg.bandwidth);
  }
  const SemanticAdjacency* sem_ptr = sem ? &*sem : nullptr;

  ModelParams params = ModelParams::init(enumeration, x.n_cols,
                                         static_cast<std::size_t>(g.num_classes),
                                         cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamState adam = AdamState::init_like(params);
  const FixedMixture* fixed_ptr = fixed ? &*fixed : nullptr;

  RunRecord record;
  for (const auto& [l, subset] : enumeration.branches()) {
    record.branches.push_back({l, subset, branch_name(first, subset)});
  }
  record.first_order_names = first.names;
  record.fixed_mixture = fixed;

  double best_val = -1.0;
  std::size_t since_best = 0;
  ModelParams best_params = params;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ForwardCache cache = forward(params, g, first, enumeration, fixed_ptr);
    EpochStats stats;
    stats.ce = ce_loss(cache, g.labels, g.splits.train);
    if (sem_ptr) stats.rec = rec_loss(cache.multi_order, *sem_ptr).value;
    stats.total = stats.ce + cfg.gamma * stats.rec;
    std::tie(stats.train_macro, stats.train_micro) =
        evaluate(cache, g.labels, g.splits.train, g.num_classes);
    if (!g.splits.val.empty()) {
      std::tie(stats.val_macro, stats.val_micro) =
          evaluate(cache, g.labels, g.splits.val, g.num_classes);
    }
    record.epochs.push_back(stats);

    double selection = g.splits.val.empty() ? stats.train_micro : stats.val_micro;
    if (selection > best_val) {
      best_val = selection;
      record.best_epoch = epoch;
      best_params = params;
      record.beta = cache.beta;
      since_best = 0;
    } else if (cfg.patience && ++since_best > *cfg.patience) {
      break;
    }

    if (epoch + 1 < cfg.epochs) {
      Gradients grads =
          backward(cache, params, g, g.labels, g.splits.train, sem_ptr, cfg.gamma);
      adam_step(adam, params, grads, cfg.adam);
    }
  }

  ForwardCache best_cache = forward(best_params, g, first, enumeration, fixed_ptr);
  if (!g.splits.test.empty()) {
    std::tie(record.test_macro, record.test_micro) =
        evaluate(best_cache, g.labels, g.splits.test, g.num_classes);
  }
  record.best_params = std::move(best_params);
  return record;
}

}  // namespace

RunRecord train(const HeteroGraph& g, std::span<const MetaPathSpec> specs,
                const TrainConfig& cfg) {
  if (specs.empty()) throw ArgumentError("train: no meta-path specs");
  return train_impl(g, specs, cfg, std::nullopt);
}

RunRecord run_fixed_metapath_baseline(const HeteroGraph& g, std::span<const MetaPathSpec> specs,
                                      const TrainConfig& cfg, const BaselineChoice& which) {
  if (specs.empty()) throw ArgumentError("baseline: no meta-path specs");
  const int max_order = static_cast<int>(specs.size());
  if (!which.uniform_fusion && (which.index < 0 || which.index >= max_order)) {
    throw ArgumentError("baseline: meta-path index " + std::to_string(which.index) +
                        " outside [0, " + std::to_string(max_order) + ")");
  }
  SubsetEnumeration enumeration = enumerate_subsets(max_order);
  FixedMixture fixed;
  auto branches = enumeration.branches();
  for (const auto& [l, subset] : branches) {
    auto ls = static_cast<std::size_t>(l);
    DenseMatrix eye(ls, ls);
    for (std::size_t i = 0; i < ls; ++i) eye.at(i, i) = 1.0;
    fixed.alphas.push_back(std::move(eye));
  }
  fixed.beta.assign(branches.size(), 0.0);
  // Order-1 branches come first (t ascending), so branch j is subset {j}.
  if (which.uniform_fusion) {
    for (int j = 0; j < max_order; ++j) {
      fixed.beta[static_cast<std::size_t>(j)] = 1.0 / static_cast<double>(max_order);
    }
  } else {
    fixed.beta[static_cast<std::size_t>(which.index)] = 1.0;
  }
  return train_impl(g, specs, cfg, fixed);
}

std::vector<double> beta_mass_by_order(const RunRecord& record) {
  int max_order = 0;
  for (const auto& b : record.branches) max_order = std::max(max_order, b.order);
  std::vector<double> mass(static_cast<std::size_t>(max_order), 0.0);
  for (std::size_t b = 0; b < record.branches.size(); ++b) {
    mass[static_cast<std::size_t>(record.branches[b].order - 1)] += record.beta[b];
  }
  return mass;
}

std::string TrainConfig::to_json() const {
  json j;
  j["gamma"] = gamma;
  j["topk"] = topk;
  j["metric"] = to_string(metric);
  if (bandwidth) j["bandwidth"] = *bandwidth;
  j["lr"] = adam.lr;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["train_ratio"] = split_ratios[0];
  j["val_ratio"] = split_ratios[1];
  j["test_ratio"] = split_ratios[2];
  j["adam_beta1"] = adam.beta1;
  j["adam_beta2"] = adam.beta2;
  j["adam_eps"] = adam.eps;
  if (patience) j["patience"] = *patience;
  return j.dump();
}

std::string run_record_json(const RunRecord& record, const TrainConfig& cfg) {
  json j;
  j["config"] = json::parse(cfg.to_json());
  j["branches"] = json::array();
  for (const auto& b : record.branches) {
    j["branches"].push_back({{"order", b.order}, {"subset", b.subset}, {"name", b.name}});
  }
  j["epochs"] = json::array();
  for (const auto& e : record.epochs) {
    j["epochs"].push_back({{"total", e.total},
                           {"ce", e.ce},
                           {"rec", e.rec},
                           {"train_macro", e.train_macro},
                           {"train_micro", e.train_micro},
                           {"val_macro", e.val_macro},
                           {"val_micro", e.val_micro}});
  }
  j["best_epoch"] = record.best_epoch;
  j["beta"] = record.beta;
  j["beta_mass_by_order"] = beta_mass_by_order(record);
  j["test_macro"] = record.test_macro;
  j["test_micro"] = record.test_micro;
  return j.dump(2);
}

void write_run_json(const RunRecord& record, const TrainConfig& cfg,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << run_record_json(record, cfg) << "\n";
}

void write_epoch_csv(const RunRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss,ce,rec,train_macro,train_micro,val_macro,val_micro\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (std::size_t e = 0; e < record.epochs.size(); ++e) {
    const auto& s = record.epochs[e];
    out << e;
    put(s.total);
    put(s.ce);
    put(s.rec);
    put(s.train_macro);
    put(s.train_micro);
    put(s.val_macro);
    put(s.val_micro);
    out << '\n';
  }
}

Checkpoint make_checkpoint(const RunRecord& record, const TrainConfig& cfg,
                           std::size_t feature_dim, std::size_t num_classes) {
  Checkpoint ckpt;
  ckpt.max_order = static_cast<int>(record.first_order_names.size());
  ckpt.feature_dim = feature_dim;
  ckpt.num_classes = num_classes;
  ckpt.config_hash = fnv1a_hash(cfg.to_json());
  ckpt.first_order_names = record.first_order_names;
  ckpt.params = record.best_params;
  ckpt.fixed_mixture = record.fixed_mixture;
  return ckpt;
}

}  // namespace mog
