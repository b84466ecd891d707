#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "mog/hetero.hpp"

namespace fs = std::filesystem;
using mog::HeteroGraph;
using mog::SynthConfig;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_target = 60;
  cfg.num_classes = 3;
  cfg.feature_dim = 5;
  cfg.feature_noise = 0.8;
  cfg.relations.push_back({true, 30, 0.3, 0.03});
  cfg.relations.push_back({false, 24, 0.1, 0.1});
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void append_line(const fs::path& file, const std::string& line) {
  std::ofstream out(file, std::ios::app);
  out << line << "\n";
}

}  // namespace

TEST_CASE("generate_synthetic is deterministic per seed") {
  SynthConfig cfg = small_config();
  HeteroGraph a = mog::generate_synthetic(cfg, 42);
  HeteroGraph b = mog::generate_synthetic(cfg, 42);
  HeteroGraph c = mog::generate_synthetic(cfg, 43);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("generate_synthetic shape and labeling contract") {
  SynthConfig cfg = small_config();
  HeteroGraph g = mog::generate_synthetic(cfg, 7);
  CHECK_NOTHROW(mog::validate(g));
  CHECK(g.target_count() == 60);
  CHECK(g.num_classes == 3);
  CHECK(g.node_types.size() == 3);  // target + one aux type per relation
  CHECK(g.relations.size() == 2);
  CHECK(g.meta_paths.size() == 2);
  CHECK(g.target_features().n_rows == 60);
  CHECK(g.target_features().n_cols == 5);
  for (std::size_t i = 0; i < 60; ++i) CHECK(g.labels[i] == static_cast<int>(i % 3));
  // Every meta-path is the R_i R_i^T chain.
  for (std::size_t r = 0; r < 2; ++r) {
    REQUIRE(g.meta_paths[r].chain.size() == 2);
    CHECK(g.meta_paths[r].chain[0].relation == static_cast<int>(r));
    CHECK_FALSE(g.meta_paths[r].chain[0].transpose);
    CHECK(g.meta_paths[r].chain[1].relation == static_cast<int>(r));
    CHECK(g.meta_paths[r].chain[1].transpose);
  }
}

TEST_CASE("informative relations favor same-class auxiliary blocks") {
  SynthConfig cfg;
  cfg.n_target = 300;
  cfg.num_classes = 3;
  cfg.feature_dim = 4;
  cfg.relations.push_back({true, 90, 0.3, 0.03});
  HeteroGraph g = mog::generate_synthetic(cfg, 11);
  const mog::SparseMatrix& r = g.relations[0].matrix;
  std::size_t in_block = 0, out_block = 0;
  for (std::size_t i = 0; i < r.n_rows; ++i) {
    for (std::size_t k = r.row_offsets[i]; k < r.row_offsets[i + 1]; ++k) {
      std::size_t j = r.col_indices[k];
      if (static_cast<int>(i % 3) == static_cast<int>(j % 3)) {
        ++in_block;
      } else {
        ++out_block;
      }
    }
  }
  // Expected in-block edges 300*30*0.3 = 2700, out-block 300*60*0.03 = 540.
  double in_rate = static_cast<double>(in_block) / (300.0 * 30.0);
  double out_rate = static_cast<double>(out_block) / (300.0 * 60.0);
  CHECK(in_rate == doctest::Approx(0.3).epsilon(0.1));
  CHECK(out_rate == doctest::Approx(0.03).epsilon(0.25));
}

TEST_CASE("noisy relation density matches its edge probability") {
  SynthConfig cfg;
  cfg.n_target = 250;
  cfg.num_classes = 2;
  cfg.feature_dim = 3;
  cfg.relations.push_back({false, 200, 0.08, 0.08});
  HeteroGraph g = mog::generate_synthetic(cfg, 5);
  double density = static_cast<double>(g.relations[0].matrix.nnz()) / (250.0 * 200.0);
  CHECK(density == doctest::Approx(0.08).epsilon(0.08));
}

TEST_CASE("generate_synthetic rejects bad configs") {
  SynthConfig cfg = small_config();
  cfg.num_classes = 1;
  CHECK_THROWS_AS(mog::generate_synthetic(cfg, 0), mog::ArgumentError);
  cfg = small_config();
  cfg.feature_dim = 2;
  CHECK_THROWS_AS(mog::generate_synthetic(cfg, 0), mog::ArgumentError);
  cfg = small_config();
  cfg.relations.clear();
  CHECK_THROWS_AS(mog::generate_synthetic(cfg, 0), mog::ArgumentError);
  cfg = small_config();
  cfg.relations[0].p_in = 1.5;
  CHECK_THROWS_AS(mog::generate_synthetic(cfg, 0), mog::ArgumentError);
  cfg = small_config();
  cfg.feature_noise = -1.0;
  CHECK_THROWS_AS(mog::generate_synthetic(cfg, 0), mog::ArgumentError);
}

TEST_CASE("split_nodes produces disjoint seeded splits of floor sizes") {
  mog::Splits s = mog::split_nodes(103, 0.2, 0.1, 0.1, 9);
  CHECK(s.train.size() == 20);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 10);
  std::set<std::size_t> seen;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (std::size_t i : *part) {
      CHECK(i < 103);
      CHECK(seen.insert(i).second);  // no overlap across parts
    }
  }
  CHECK(s == mog::split_nodes(103, 0.2, 0.1, 0.1, 9));
  CHECK(s != mog::split_nodes(103, 0.2, 0.1, 0.1, 10));
  CHECK_THROWS_AS(mog::split_nodes(10, 0.7, 0.3, 0.2, 0), mog::ArgumentError);
  CHECK_THROWS_AS(mog::split_nodes(10, -0.1, 0.3, 0.2, 0), mog::ArgumentError);
}

TEST_CASE("dataset write/load round-trips exactly") {
  TempDir dir("mog_roundtrip");
  HeteroGraph g = mog::generate_synthetic(small_config(), 21);
  mog::write_dataset(g, dir.path);
  HeteroGraph back = mog::load_dataset(dir.path);
  CHECK(back == g);
}

TEST_CASE("load_dataset reports missing files") {
  TempDir dir("mog_missing");
  CHECK_THROWS_AS(mog::load_dataset(dir.path / "nope"), mog::NotFoundError);
  HeteroGraph g = mog::generate_synthetic(small_config(), 3);
  mog::write_dataset(g, dir.path);
  fs::remove(dir.path / "labels.tsv");
  CHECK_THROWS_AS(mog::load_dataset(dir.path), mog::NotFoundError);
}

TEST_CASE("load_dataset reports parse errors with file and line") {
  TempDir dir("mog_parse");
  HeteroGraph g = mog::generate_synthetic(small_config(), 3);
  mog::write_dataset(g, dir.path);
  append_line(dir.path / "relation_0.tsv", "0\tnot_a_number\t1");
  try {
    mog::load_dataset(dir.path);
    FAIL("expected ParseError");
  } catch (const mog::ParseError& e) {
    std::string msg = e.what();
    CHECK(msg.find("relation_0.tsv") != std::string::npos);
    CHECK(msg.find(":") != std::string::npos);
  }
}

TEST_CASE("load_dataset rejects out-of-range indices") {
  TempDir dir("mog_range");
  HeteroGraph g = mog::generate_synthetic(small_config(), 3);
  mog::write_dataset(g, dir.path);
  append_line(dir.path / "relation_0.tsv", "999\t0\t1");
  CHECK_THROWS_AS(mog::load_dataset(dir.path), mog::ValidationError);
}

TEST_CASE("load_dataset ignores comment lines") {
  TempDir dir("mog_comment");
  HeteroGraph g = mog::generate_synthetic(small_config(), 3);
  mog::write_dataset(g, dir.path);
  std::ifstream in(dir.path / "labels.tsv");
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(dir.path / "labels.tsv");
  out << "# class ids, one per target node\n" << body;
  out.close();
  CHECK(mog::load_dataset(dir.path) == g);
}

TEST_CASE("validate names the violated invariant") {
  HeteroGraph g = mog::generate_synthetic(small_config(), 17);

  SUBCASE("label out of range") {
    g.labels[4] = 7;
    CHECK_THROWS_AS(mog::validate(g), mog::ValidationError);
  }
  SUBCASE("overlapping splits") {
    g.splits.val.push_back(g.splits.train.front());
    CHECK_THROWS_AS(mog::validate(g), mog::ValidationError);
  }
  SUBCASE("empty train split") {
    g.splits.train.clear();
    CHECK_THROWS_AS(mog::validate(g), mog::ValidationError);
  }
  SUBCASE("split index out of range") {
    g.splits.test.push_back(g.target_count());
    CHECK_THROWS_AS(mog::validate(g), mog::ValidationError);
  }
  SUBCASE("negative relation weight") {
    g.relations[0].matrix = mog::SparseMatrix::from_triplets(
        g.target_count(), g.type(1).count, {{0, 0, -1.0}});
    CHECK_THROWS_AS(mog::validate(g), mog::ValidationError);
  }
  SUBCASE("missing target features") {
    g.node_types[0].features.reset();
    CHECK_THROWS_AS(mog::validate(g), mog::ValidationError);
  }
}
