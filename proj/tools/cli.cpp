// Command-line front end for the multi-order meta-path toolkit.
//
// Subcommands: synth, train, baseline, gradcheck, inspect, eval.
// Exit codes: 0 success, 1 usage, 2 validation, 3 numeric-check failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mog/hetero.hpp"
#include "mog/metapath.hpp"
#include "mog/model.hpp"
#include "mog/semantic.hpp"
#include "mog/train.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

struct CommonTrainFlags {
  std::string data;
  std::string out = ".";
  std::string config_file;
  std::string checkpoint;
  bool emit_json = false;
  std::optional<double> gamma;
  std::optional<std::size_t> topk;
  std::optional<std::string> metric;
  std::optional<double> bandwidth;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> train_ratio;
  std::optional<double> val_ratio;
  std::optional<double> test_ratio;
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& f) {
  cmd->add_option("--data", f.data, "dataset directory")->required();
  cmd->add_option("--out", f.out, "output directory for run artifacts");
  cmd->add_option("--config", f.config_file, "JSON config file (flags override it)");
  cmd->add_option("--checkpoint", f.checkpoint, "write best-epoch parameters here");
  cmd->add_flag("--json", f.emit_json, "machine-readable stdout");
  cmd->add_option("--gamma", f.gamma, "semantic supervision weight");
  cmd->add_option("--topk", f.topk, "semantic neighbor count k");
  cmd->add_option("--metric", f.metric, "similarity metric: cosine|gaussian");
  cmd->add_option("--bandwidth", f.bandwidth, "gaussian bandwidth");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--train-ratio", f.train_ratio, "regenerate splits: train fraction");
  cmd->add_option("--val-ratio", f.val_ratio, "regenerate splits: val fraction");
  cmd->add_option("--test-ratio", f.test_ratio, "regenerate splits: test fraction");
}

mog::TrainConfig resolve_config(const CommonTrainFlags& f) {
  mog::TrainConfig cfg;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw mog::NotFoundError("missing file: " + f.config_file);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw mog::ParseError(f.config_file + ": " + e.what());
    }
    if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
    if (j.contains("topk")) cfg.topk = j["topk"].get<std::size_t>();
    if (j.contains("metric")) cfg.metric = mog::similarity_from_string(j["metric"]);
    if (j.contains("bandwidth")) cfg.bandwidth = j["bandwidth"].get<double>();
    if (j.contains("lr")) cfg.adam.lr = j["lr"].get<double>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("train_ratio")) cfg.split_ratios[0] = j["train_ratio"].get<double>();
    if (j.contains("val_ratio")) cfg.split_ratios[1] = j["val_ratio"].get<double>();
    if (j.contains("test_ratio")) cfg.split_ratios[2] = j["test_ratio"].get<double>();
    if (j.contains("patience")) cfg.patience = j["patience"].get<std::size_t>();
  }
  if (f.gamma) cfg.gamma = *f.gamma;
  if (f.topk) cfg.topk = *f.topk;
  if (f.metric) cfg.metric = mog::similarity_from_string(*f.metric);
  if (f.bandwidth) cfg.bandwidth = *f.bandwidth;
  if (f.lr) cfg.adam.lr = *f.lr;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.seed) cfg.seed = *f.seed;
  if (f.train_ratio) cfg.split_ratios[0] = *f.train_ratio;
  if (f.val_ratio) cfg.split_ratios[1] = *f.val_ratio;
  if (f.test_ratio) cfg.split_ratios[2] = *f.test_ratio;
  return cfg;
}

mog::HeteroGraph load_for_training(const CommonTrainFlags& f, const mog::TrainConfig& cfg) {
  mog::HeteroGraph g = mog::load_dataset(f.data);
  if (f.train_ratio || f.val_ratio || f.test_ratio) {
    g.splits = mog::split_nodes(g.target_count(), cfg.split_ratios[0], cfg.split_ratios[1],
                                cfg.split_ratios[2], cfg.seed ^ 0x517cc1b727220a95ULL);
    mog::validate(g);
  }
  if (g.meta_paths.empty()) {
    throw mog::ValidationError(f.data + ": manifest declares no meta_paths");
  }
  return g;
}

void emit_run(const mog::RunRecord& record, const mog::TrainConfig& cfg,
              const CommonTrainFlags& f, const mog::HeteroGraph& g) {
  namespace fs = std::filesystem;
  fs::create_directories(f.out);
  mog::write_run_json(record, cfg, fs::path(f.out) / "run.json");
  mog::write_epoch_csv(record, fs::path(f.out) / "epochs.csv");
  if (!f.checkpoint.empty()) {
    auto ckpt = mog::make_checkpoint(record, cfg, g.target_features().n_cols,
                                     static_cast<std::size_t>(g.num_classes));
    mog::save_checkpoint(ckpt, f.checkpoint);
  }
  auto mass = mog::beta_mass_by_order(record);
  if (f.emit_json) {
    json j;
    j["best_epoch"] = record.best_epoch;
    j["test_macro"] = record.test_macro;
    j["test_micro"] = record.test_micro;
    j["beta"] = record.beta;
    j["beta_mass_by_order"] = mass;
    std::cout << j.dump() << "\n";
  } else {
    std::printf("best epoch: %zu\n", record.best_epoch);
    std::printf("test Macro-F1: %.4f  Micro-F1: %.4f\n", record.test_macro, record.test_micro);
    for (std::size_t l = 0; l < mass.size(); ++l) {
      std::printf("beta mass, order %zu: %5.1f%%\n", l + 1, 100.0 * mass[l]);
    }
  }
}

int cmd_synth(const std::string& out_dir, std::size_t n, int classes,
              const std::string& relations, std::size_t aux, double p_in, double p_out,
              double p_noise, int feat_dim, double noise, std::uint64_t seed, bool emit_json) {
  mog::SynthConfig cfg;
  cfg.n_target = n;
  cfg.num_classes = classes;
  cfg.feature_dim = feat_dim;
  cfg.feature_noise = noise;
  std::stringstream ss(relations);
  std::string kind;
  while (std::getline(ss, kind, ',')) {
    mog::RelationPlan plan;
    plan.aux_count = aux;
    if (kind == "informative") {
      plan.informative = true;
      plan.p_in = p_in;
      plan.p_out = p_out;
    } else if (kind == "noisy") {
      plan.informative = false;
      plan.p_in = p_noise;
      plan.p_out = p_noise;
    } else {
      throw mog::ArgumentError("unknown relation kind '" + kind + "'");
    }
    cfg.relations.push_back(plan);
  }
  mog::HeteroGraph g = mog::generate_synthetic(cfg, seed);
  mog::write_dataset(g, out_dir);

  json summary;
  summary["target_nodes"] = g.target_count();
  summary["num_classes"] = g.num_classes;
  std::vector<std::size_t> class_counts(static_cast<std::size_t>(g.num_classes), 0);
  for (int y : g.labels) {
    if (y >= 0) ++class_counts[static_cast<std::size_t>(y)];
  }
  summary["class_counts"] = class_counts;
  json densities = json::array();
  for (const auto& r : g.relations) {
    double cells = static_cast<double>(r.matrix.n_rows) * static_cast<double>(r.matrix.n_cols);
    densities.push_back({{"name", r.name}, {"nnz", r.matrix.nnz()},
                         {"density", static_cast<double>(r.matrix.nnz()) / cells}});
  }
  summary["relations"] = densities;
  std::cout << (emit_json ? summary.dump() : summary.dump(2)) << "\n";
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, double step, double gamma, bool emit_json) {
  mog::SynthConfig synth;
  synth.n_target = 12;
  synth.num_classes = 3;
  synth.feature_dim = 5;
  synth.feature_noise = 0.4;
  synth.split_ratios = {0.5, 0.2, 0.2};
  // Dense wiring keeps every multi-order entry strictly positive, so the
  // semantic log term stays smooth at the probe point.
  for (int r = 0; r < 3; ++r) synth.relations.push_back({true, 6, 0.9, 0.55});
  mog::HeteroGraph g = mog::generate_synthetic(synth, seed);
  mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
  mog::SubsetEnumeration enumeration = mog::enumerate_subsets(static_cast<int>(first.size()));
  std::optional<mog::SemanticAdjacency> sem;
  if (gamma > 0.0) {
    sem = mog::build_semantic_adjacency(g.target_features(), 3, mog::Similarity::cosine);
  }
  mog::ModelParams params =
      mog::ModelParams::init(enumeration, g.target_features().n_cols,
                             static_cast<std::size_t>(g.num_classes), seed ^ 0x9e3779b97f4a7c15ULL);
  mog::FdReport report = mog::finite_diff_check(params, g, first, enumeration,
                                                sem ? &*sem : nullptr, gamma, step);
  constexpr double kTolerance = 1e-4;
  if (emit_json) {
    json j;
    j["w"] = {{"max_rel", report.w.max_rel}, {"mean_rel", report.w.mean_rel}};
    j["beta"] = {{"max_rel", report.beta.max_rel}, {"mean_rel", report.beta.mean_rel}};
    j["alpha"] = {{"max_rel", report.alpha.max_rel}, {"mean_rel", report.alpha.mean_rel}};
    j["tolerance"] = kTolerance;
    j["pass"] = report.worst() < kTolerance;
    std::cout << j.dump() << "\n";
  } else {
    std::printf("W     max rel %.3e  mean rel %.3e\n", report.w.max_rel, report.w.mean_rel);
    std::printf("beta  max rel %.3e  mean rel %.3e\n", report.beta.max_rel, report.beta.mean_rel);
    std::printf("alpha max rel %.3e  mean rel %.3e\n", report.alpha.max_rel,
                report.alpha.mean_rel);
  }
  if (report.w.max_rel >= kTolerance) {
    std::cerr << "gradcheck: W gradient exceeds tolerance\n";
    return kExitNumeric;
  }
  if (report.beta.max_rel >= kTolerance) {
    std::cerr << "gradcheck: beta gradient exceeds tolerance\n";
    return kExitNumeric;
  }
  if (report.alpha.max_rel >= kTolerance) {
    std::cerr << "gradcheck: alpha gradient exceeds tolerance\n";
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_inspect(const std::string& path, bool emit_json) {
  mog::Checkpoint ckpt = mog::load_checkpoint(path);
  mog::SubsetEnumeration enumeration = mog::enumerate_subsets(ckpt.max_order);
  std::vector<double> beta;
  if (ckpt.fixed_mixture) {
    beta = ckpt.fixed_mixture->beta;
  } else {
    double mx = *std::max_element(ckpt.params.beta_logits.begin(), ckpt.params.beta_logits.end());
    double sum = 0.0;
    for (double v : ckpt.params.beta_logits) sum += std::exp(v - mx);
    for (double v : ckpt.params.beta_logits) beta.push_back(std::exp(v - mx) / sum);
  }
  auto branches = enumeration.branches();
  std::vector<double> mass(static_cast<std::size_t>(ckpt.max_order), 0.0);
  json branch_list = json::array();
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto& [l, subset] = branches[b];
    mass[static_cast<std::size_t>(l - 1)] += beta[b];
    std::string name;
    for (std::size_t i = 0; i < subset.size(); ++i) {
      if (i) name += "*";
      name += ckpt.first_order_names[static_cast<std::size_t>(subset[i])];
    }
    branch_list.push_back({{"order", l}, {"name", name}, {"beta_percent", 100.0 * beta[b]}});
  }
  if (emit_json) {
    json j;
    j["branches"] = branch_list;
    json order_mass = json::array();
    for (std::size_t l = 0; l < mass.size(); ++l) {
      order_mass.push_back({{"order", l + 1}, {"percent", 100.0 * mass[l]}});
    }
    j["order_mass"] = order_mass;
    std::cout << j.dump() << "\n";
  } else {
    for (const auto& b : branch_list) {
      std::printf("order %d  %-24s %6.2f%%\n", b["order"].get<int>(),
                  b["name"].get<std::string>().c_str(), b["beta_percent"].get<double>());
    }
    for (std::size_t l = 0; l < mass.size(); ++l) {
      std::printf("order %zu total: %6.2f%%\n", l + 1, 100.0 * mass[l]);
    }
  }
  return kExitOk;
}

int cmd_eval(const std::string& data, const std::string& checkpoint, bool emit_json) {
  mog::HeteroGraph g = mog::load_dataset(data);
  if (g.meta_paths.empty()) {
    throw mog::ValidationError(data + ": manifest declares no meta_paths");
  }
  mog::Checkpoint ckpt = mog::load_checkpoint(checkpoint);
  mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
  mog::SubsetEnumeration enumeration = mog::enumerate_subsets(static_cast<int>(first.size()));
  const mog::FixedMixture* fixed = ckpt.fixed_mixture ? &*ckpt.fixed_mixture : nullptr;
  mog::ForwardCache cache = mog::forward(ckpt.params, g, first, enumeration, fixed);
  if (g.splits.test.empty()) throw mog::ValidationError(data + ": dataset has no test split");
  auto [macro, micro] = mog::evaluate(cache, g.labels, g.splits.test, g.num_classes);
  if (emit_json) {
    json j;
    j["test_macro"] = macro;
    j["test_micro"] = micro;
    std::cout << j.dump() << "\n";
  } else {
    std::printf("test Macro-F1: %.4f  Micro-F1: %.4f\n", macro, micro);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive multi-order meta-path graph convolution toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
  std::string synth_out;
  std::size_t synth_n = 300;
  int synth_classes = 3;
  std::string synth_relations = "informative,noisy,noisy";
  std::size_t synth_aux = 120;
  double synth_p_in = 0.2, synth_p_out = 0.02, synth_p_noise = 0.05;
  int synth_feat = 8;
  double synth_noise = 1.0;
  std::uint64_t synth_seed = 0;
  bool synth_json = false;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n", synth_n, "target node count");
  synth->add_option("--classes", synth_classes, "class count");
  synth->add_option("--relations", synth_relations, "comma list of informative|noisy");
  synth->add_option("--aux-size", synth_aux, "auxiliary nodes per relation");
  synth->add_option("--p-in", synth_p_in, "informative intra-class edge probability");
  synth->add_option("--p-out", synth_p_out, "informative inter-class edge probability");
  synth->add_option("--p-noise", synth_p_noise, "noisy relation edge probability");
  synth->add_option("--feat-dim", synth_feat, "feature dimension");
  synth->add_option("--noise", synth_noise, "feature noise stddev");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_flag("--json", synth_json, "compact JSON summary");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the adaptive model");
  CommonTrainFlags train_flags;
  add_train_flags(train_cmd, train_flags);

  // baseline
  auto* baseline_cmd = app.add_subcommand("baseline", "train with frozen meta-path weights");
  CommonTrainFlags baseline_flags;
  add_train_flags(baseline_cmd, baseline_flags);
  std::string baseline_which;
  baseline_cmd->add_option("--baseline", baseline_which, "single:<j> or uniform")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  std::uint64_t gc_seed = 0;
  double gc_step = 1e-5;
  double gc_gamma = 0.1;
  bool gc_json = false;
  gradcheck->add_option("--seed", gc_seed, "fixture seed");
  gradcheck->add_option("--step", gc_step, "central difference step");
  gradcheck->add_option("--gamma", gc_gamma, "semantic supervision weight");
  gradcheck->add_flag("--json", gc_json, "machine-readable stdout");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "print checkpoint beta/alpha summary");
  std::string inspect_ckpt;
  bool inspect_json = false;
  inspect->add_option("--checkpoint", inspect_ckpt, "checkpoint path")->required();
  inspect->add_flag("--json", inspect_json, "machine-readable stdout");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string eval_data, eval_ckpt;
  bool eval_json = false;
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_flag("--json", eval_json, "machine-readable stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) {
      return cmd_synth(synth_out, synth_n, synth_classes, synth_relations, synth_aux, synth_p_in,
                       synth_p_out, synth_p_noise, synth_feat, synth_noise, synth_seed,
                       synth_json);
    }
    if (*train_cmd) {
      mog::TrainConfig cfg = resolve_config(train_flags);
      mog::HeteroGraph g = load_for_training(train_flags, cfg);
      mog::RunRecord record = mog::train(g, g.meta_paths, cfg);
      emit_run(record, cfg, train_flags, g);
      return kExitOk;
    }
    if (*baseline_cmd) {
      mog::TrainConfig cfg = resolve_config(baseline_flags);
      mog::HeteroGraph g = load_for_training(baseline_flags, cfg);
      mog::BaselineChoice which;
      if (baseline_which == "uniform") {
        which.uniform_fusion = true;
      } else if (baseline_which.rfind("single:", 0) == 0) {
        which.index = std::stoi(baseline_which.substr(7));
      } else {
        throw mog::ArgumentError("--baseline must be 'uniform' or 'single:<j>'");
      }
      mog::RunRecord record = mog::run_fixed_metapath_baseline(g, g.meta_paths, cfg, which);
      emit_run(record, cfg, baseline_flags, g);
      return kExitOk;
    }
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_step, gc_gamma, gc_json);
    if (*inspect) return cmd_inspect(inspect_ckpt, inspect_json);
    if (*eval_cmd) return cmd_eval(eval_data, eval_ckpt, eval_json);
  } catch (const mog::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mog::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
