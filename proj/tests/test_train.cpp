#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mog/hetero.hpp"
#include "mog/model.hpp"
#include "mog/train.hpp"

namespace fs = std::filesystem;
using mog::DenseMatrix;

namespace {

mog::ModelParams scalar_params(double w0) {
  mog::ModelParams p;
  p.w = DenseMatrix(1, 1, {w0});
  p.beta_logits = {0.0};
  p.alpha_logits = {DenseMatrix(1, 1, {0.0})};
  return p;
}

mog::Gradients scalar_grads(double gw, double gb, double ga) {
  mog::Gradients g;
  g.w = DenseMatrix(1, 1, {gw});
  g.beta_logits = {gb};
  g.alpha_logits = {DenseMatrix(1, 1, {ga})};
  return g;
}

mog::HeteroGraph train_fixture(std::uint64_t seed) {
  mog::SynthConfig cfg;
  cfg.n_target = 60;
  cfg.num_classes = 3;
  cfg.feature_dim = 5;
  cfg.feature_noise = 0.6;
  cfg.split_ratios = {0.3, 0.2, 0.3};
  cfg.relations.push_back({true, 30, 0.35, 0.04});
  cfg.relations.push_back({false, 30, 0.08, 0.08});
  return mog::generate_synthetic(cfg, seed);
}

mog::TrainConfig quick_config(std::uint64_t seed, std::size_t epochs = 25) {
  mog::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.topk = 5;
  cfg.gamma = 0.1;
  return cfg;
}

}  // namespace

TEST_CASE("adam_step matches the hand-worked first update") {
  mog::ModelParams p = scalar_params(0.5);
  mog::AdamState state = mog::AdamState::init_like(p);
  mog::AdamConfig cfg;  // lr 0.01
  mog::adam_step(state, p, scalar_grads(2.0, 0.0, 0.0), cfg);
  // m=0.2, v=0.004; bias correction gives mhat=2, vhat=4, so the step is
  // lr * 2 / (2 + eps).
  double expect = 0.5 - 0.01 * 2.0 / (2.0 + 1e-8);
  CHECK(p.w.at(0, 0) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(state.step_count == 1);
}

TEST_CASE("adam_step bumps the parameter version and checks shapes") {
  mog::ModelParams p = scalar_params(0.0);
  std::uint64_t v0 = p.version;
  mog::AdamState state = mog::AdamState::init_like(p);
  mog::adam_step(state, p, scalar_grads(1.0, 1.0, 1.0), mog::AdamConfig{});
  CHECK(p.version == v0 + 1);

  mog::Gradients bad = scalar_grads(1.0, 1.0, 1.0);
  bad.w = DenseMatrix(2, 2);
  CHECK_THROWS_AS(mog::adam_step(state, p, bad, mog::AdamConfig{}), mog::ContractError);
}

TEST_CASE("adam with a constant gradient moves at roughly lr per step") {
  mog::ModelParams p = scalar_params(1.0);
  mog::AdamState state = mog::AdamState::init_like(p);
  for (int i = 0; i < 100; ++i) {
    mog::adam_step(state, p, scalar_grads(3.0, 0.0, 0.0), mog::AdamConfig{});
  }
  CHECK(p.w.at(0, 0) == doctest::Approx(1.0 - 100 * 0.01).epsilon(1e-3));
}

TEST_CASE("f1_scores on hand-worked confusion tables") {
  // truth (0,0,1,1), predicted (0,1,1,1): micro 3/4; class 0 F1 = 2/3,
  // class 1 F1 = 4/5, macro 11/15.
  std::vector<int> truth = {0, 0, 1, 1};
  std::vector<int> pred = {0, 1, 1, 1};
  auto [macro, micro] = mog::f1_scores(truth, pred, 2);
  CHECK(micro == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(macro == doctest::Approx(11.0 / 15.0).epsilon(1e-15));

  // A class absent from both truth and prediction contributes F1 = 0.
  auto [macro3, micro3] = mog::f1_scores(truth, pred, 3);
  CHECK(micro3 == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(macro3 == doctest::Approx(22.0 / 45.0).epsilon(1e-15));

  auto [perfect_macro, perfect_micro] = mog::f1_scores(truth, truth, 2);
  CHECK(perfect_macro == 1.0);
  CHECK(perfect_micro == 1.0);

  std::vector<int> bad = {0, 0, 1, 5};
  CHECK_THROWS_AS(mog::f1_scores(truth, bad, 2), mog::ArgumentError);
}

TEST_CASE("train runs are deterministic per seed") {
  mog::HeteroGraph g = train_fixture(2);
  mog::TrainConfig cfg = quick_config(7);
  mog::RunRecord a = mog::train(g, g.meta_paths, cfg);
  mog::RunRecord b = mog::train(g, g.meta_paths, cfg);
  CHECK(mog::run_record_json(a, cfg) == mog::run_record_json(b, cfg));
  CHECK(a.test_micro == b.test_micro);
  CHECK(a.best_params.w == b.best_params.w);

  mog::TrainConfig other = quick_config(8);
  mog::RunRecord c = mog::train(g, g.meta_paths, other);
  CHECK(mog::run_record_json(a, cfg) != mog::run_record_json(c, other));
}

TEST_CASE("train record structure is coherent") {
  mog::HeteroGraph g = train_fixture(4);
  mog::TrainConfig cfg = quick_config(1, 20);
  mog::RunRecord r = mog::train(g, g.meta_paths, cfg);
  CHECK(r.epochs.size() == 20);
  CHECK(r.best_epoch < 20);
  CHECK(r.branches.size() == 3);  // L=2: {0}, {1}, {0,1}
  double beta_sum = 0.0;
  for (double b : r.beta) beta_sum += b;
  CHECK(beta_sum == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> mass = mog::beta_mass_by_order(r);
  REQUIRE(mass.size() == 2);
  CHECK(mass[0] + mass[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.first_order_names == std::vector<std::string>{"M0", "M1"});
  for (const mog::EpochStats& e : r.epochs) {
    CHECK(e.total >= e.ce - 1e-12);  // gamma * rec >= 0
    CHECK(std::isfinite(e.total));
  }
}

TEST_CASE("best epoch is chosen on validation accuracy, not the last epoch") {
  mog::HeteroGraph g = train_fixture(4);
  mog::TrainConfig cfg = quick_config(1, 40);
  mog::RunRecord r = mog::train(g, g.meta_paths, cfg);
  double best_val = r.epochs[r.best_epoch].val_micro;
  for (const mog::EpochStats& e : r.epochs) CHECK(e.val_micro <= best_val + 1e-15);
}

TEST_CASE("single meta-path baseline freezes a one-hot mixture") {
  mog::HeteroGraph g = train_fixture(6);
  mog::TrainConfig cfg = quick_config(3, 15);
  mog::BaselineChoice choice;
  choice.index = 1;
  mog::RunRecord r = mog::run_fixed_metapath_baseline(g, g.meta_paths, cfg, choice);
  REQUIRE(r.beta.size() == 3);
  CHECK(r.beta == std::vector<double>{0.0, 1.0, 0.0});
  REQUIRE(r.fixed_mixture.has_value());
  std::vector<double> mass = mog::beta_mass_by_order(r);
  CHECK(mass[0] == 1.0);
  CHECK(mass[1] == 0.0);

  choice.index = 5;
  CHECK_THROWS_AS(mog::run_fixed_metapath_baseline(g, g.meta_paths, cfg, choice),
                  mog::ArgumentError);
}

TEST_CASE("uniform fusion baseline spreads beta over first-order branches") {
  mog::HeteroGraph g = train_fixture(6);
  mog::TrainConfig cfg = quick_config(3, 15);
  mog::BaselineChoice choice;
  choice.uniform_fusion = true;
  mog::RunRecord r = mog::run_fixed_metapath_baseline(g, g.meta_paths, cfg, choice);
  CHECK(r.beta == std::vector<double>{0.5, 0.5, 0.0});
}

TEST_CASE("run artifacts are byte-stable and parseable") {
  mog::HeteroGraph g = train_fixture(9);
  mog::TrainConfig cfg = quick_config(11, 10);
  mog::RunRecord r = mog::train(g, g.meta_paths, cfg);

  fs::path dir = fs::temp_directory_path() / "mog_run_artifacts";
  fs::create_directories(dir);
  mog::write_run_json(r, cfg, dir / "a.json");
  mog::write_run_json(r, cfg, dir / "b.json");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.json").find("\"test_macro\"") != std::string::npos);

  mog::write_epoch_csv(r, dir / "epochs.csv");
  std::ifstream csv(dir / "epochs.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "epoch,loss,ce,rec,train_macro,train_micro,val_macro,val_micro");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == r.epochs.size());
  fs::remove_all(dir);
}

TEST_CASE("checkpoint from a run reproduces the reported test metrics") {
  mog::HeteroGraph g = train_fixture(10);
  mog::TrainConfig cfg = quick_config(5, 15);
  mog::RunRecord r = mog::train(g, g.meta_paths, cfg);
  mog::Checkpoint ckpt =
      mog::make_checkpoint(r, cfg, g.target_features().n_cols,
                           static_cast<std::size_t>(g.num_classes));
  CHECK(ckpt.config_hash == mog::fnv1a_hash(cfg.to_json()));

  mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
  mog::SubsetEnumeration e = mog::enumerate_subsets(ckpt.max_order);
  mog::ForwardCache cache = mog::forward(ckpt.params, g, first, e);
  auto [macro, micro] = mog::evaluate(cache, g.labels, g.splits.test, g.num_classes);
  CHECK(macro == doctest::Approx(r.test_macro).epsilon(1e-12));
  CHECK(micro == doctest::Approx(r.test_micro).epsilon(1e-12));
}

TEST_CASE("patience stops training early") {
  mog::HeteroGraph g = train_fixture(12);
  mog::TrainConfig cfg = quick_config(2, 200);
  cfg.patience = 5;
  mog::RunRecord r = mog::train(g, g.meta_paths, cfg);
  CHECK(r.epochs.size() < 200);
  CHECK(r.epochs.size() >= r.best_epoch + 1);
}
