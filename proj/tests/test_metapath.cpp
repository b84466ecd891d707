#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>
#include <vector>

#include "mog/hetero.hpp"
#include "mog/metapath.hpp"
#include "oracle.hpp"

using mog::DenseMatrix;
using mog::SparseMatrix;

namespace {

std::size_t binomial(int n, int k) {
  std::size_t r = 1;
  for (int i = 0; i < k; ++i) r = r * static_cast<std::size_t>(n - i) / static_cast<std::size_t>(i + 1);
  return r;
}

// Tiny two-type graph: 4 target nodes, 3 auxiliary nodes, one relation.
mog::HeteroGraph tiny_graph() {
  mog::HeteroGraph g;
  g.node_types.push_back({0, "target", 4, DenseMatrix(4, 2, {1, 0, 1, 0, 0, 1, 0, 1})});
  g.node_types.push_back({1, "aux", 3, std::nullopt});
  g.relations.push_back({0, "rel", 0, 1,
                         SparseMatrix::from_triplets(4, 3,
                                                     {{0, 0, 1.0},
                                                      {1, 0, 1.0},
                                                      {1, 1, 2.0},
                                                      {2, 1, 1.0},
                                                      {3, 2, 1.0}})});
  g.target_type = 0;
  g.num_classes = 2;
  g.labels = {0, 0, 1, 1};
  g.splits.train = {0, 2};
  g.meta_paths.push_back({"M0", {{0, false}, {0, true}}});
  return g;
}

mog::HeteroGraph random_graph(std::size_t n_target, int n_relations, std::uint64_t seed) {
  mog::SynthConfig cfg;
  cfg.n_target = n_target;
  cfg.num_classes = 2;
  cfg.feature_dim = 3;
  for (int r = 0; r < n_relations; ++r) cfg.relations.push_back({true, n_target / 2 + 2, 0.5, 0.2});
  return mog::generate_synthetic(cfg, seed);
}

std::vector<DenseMatrix> dense_first_order(const mog::HeteroGraph& g) {
  std::vector<DenseMatrix> out;
  for (const auto& spec : g.meta_paths) out.push_back(oracle::first_order(g, spec));
  return out;
}

DenseMatrix row_stochastic(std::size_t l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  DenseMatrix a(l, l);
  for (std::size_t i = 0; i < l; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < l; ++j) sum += (a.at(i, j) = u(rng));
    for (std::size_t j = 0; j < l; ++j) a.at(i, j) /= sum;
  }
  return a;
}

}  // namespace

TEST_CASE("enumerate_subsets counts and order") {
  for (int big_l = 1; big_l <= 6; ++big_l) {
    mog::SubsetEnumeration e = mog::enumerate_subsets(big_l);
    CHECK(e.max_order() == big_l);
    CHECK(e.branch_count() == (1u << big_l) - 1u);
    for (int l = 1; l <= big_l; ++l) {
      CHECK(e.per_order[static_cast<std::size_t>(l - 1)].size() == binomial(big_l, l));
    }
  }
  CHECK_THROWS_AS(mog::enumerate_subsets(0), mog::ArgumentError);

  mog::SubsetEnumeration e3 = mog::enumerate_subsets(3);
  CHECK(e3.per_order[0] == std::vector<std::vector<int>>{{0}, {1}, {2}});
  CHECK(e3.per_order[1] == std::vector<std::vector<int>>{{0, 1}, {0, 2}, {1, 2}});
  CHECK(e3.per_order[2] == std::vector<std::vector<int>>{{0, 1, 2}});
  auto flat = e3.branches();
  REQUIRE(flat.size() == 7);
  CHECK(flat[0].first == 1);
  CHECK(flat[3].first == 2);
  CHECK(flat[6].second == std::vector<int>{0, 1, 2});
}

TEST_CASE("compose_first_order matches the dense oracle on the tiny graph") {
  mog::HeteroGraph g = tiny_graph();
  SparseMatrix a = mog::compose_first_order(g, g.meta_paths[0]);
  CHECK(a.n_rows == 4);
  CHECK(oracle::max_abs_diff(a, oracle::first_order(g, g.meta_paths[0])) < 1e-15);
  CHECK(a == mog::transpose(a));
}

TEST_CASE("compose_first_order validates the chain") {
  mog::HeteroGraph g = tiny_graph();
  CHECK_THROWS_AS(mog::compose_first_order(g, {"empty", {}}), mog::SpecError);
  // Chain that ends at the auxiliary type, not the target type.
  CHECK_THROWS_AS(mog::compose_first_order(g, {"bad_end", {{0, false}}}), mog::SpecError);
  // Dimension mismatch inside the chain: R * R needs 3 == 4.
  CHECK_THROWS_AS(mog::compose_first_order(g, {"bad_dim", {{0, false}, {0, false}}}),
                  mog::SpecError);
  CHECK_THROWS_AS(mog::compose_first_order(g, {"bad_rel", {{5, false}, {5, true}}}),
                  mog::ArgumentError);
}

TEST_CASE("first-order composition is permutation equivariant") {
  mog::HeteroGraph g = random_graph(8, 1, 13);
  SparseMatrix a = mog::compose_first_order(g, g.meta_paths[0]);

  // Relabel the target nodes and recompose: expect P A P^T.
  std::vector<std::size_t> perm = {3, 1, 7, 0, 5, 2, 6, 4};
  mog::HeteroGraph h = g;
  const SparseMatrix& r = g.relations[0].matrix;
  std::vector<mog::Triplet> trips;
  for (std::size_t i = 0; i < r.n_rows; ++i) {
    for (std::size_t k = r.row_offsets[i]; k < r.row_offsets[i + 1]; ++k) {
      trips.push_back({perm[i], r.col_indices[k], r.values[k]});
    }
  }
  h.relations[0].matrix = SparseMatrix::from_triplets(r.n_rows, r.n_cols, std::move(trips));
  SparseMatrix b = mog::compose_first_order(h, h.meta_paths[0]);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(b.get(perm[i], perm[j]) == doctest::Approx(a.get(i, j)).epsilon(1e-13));
    }
  }
}

TEST_CASE("one-hot alpha reduces a branch to the plain matrix power") {
  mog::HeteroGraph g = random_graph(10, 3, 29);
  mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
  std::vector<DenseMatrix> dense = dense_first_order(g);

  // Branch {0, 2} with identity alpha picks A_0 * A_2 exactly; with an
  // all-on-column-0 alpha it degenerates to A_0^2.
  std::vector<const SparseMatrix*> basis = {&first.matrices[0], &first.matrices[2]};
  DenseMatrix eye(2, 2, {1, 0, 0, 1});
  SparseMatrix got = mog::build_high_order(basis, eye);
  DenseMatrix expect =
      oracle::sym_normalize(oracle::symmetrize(oracle::matmul(dense[0], dense[2])));
  CHECK(oracle::max_abs_diff(got, expect) < 1e-13);

  DenseMatrix col0(2, 2, {1, 0, 1, 0});
  SparseMatrix pow2 = mog::build_high_order(basis, col0);
  DenseMatrix expect2 =
      oracle::sym_normalize(oracle::symmetrize(oracle::matmul(dense[0], dense[0])));
  CHECK(oracle::max_abs_diff(pow2, expect2) < 1e-13);
}

TEST_CASE("build_high_order validates alpha") {
  mog::HeteroGraph g = random_graph(6, 2, 31);
  mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
  std::vector<const SparseMatrix*> basis = {&first.matrices[0], &first.matrices[1]};
  CHECK_THROWS_AS(mog::build_high_order(basis, DenseMatrix(2, 2, {0.5, 0.6, 0.5, 0.5})),
                  mog::ArgumentError);
  CHECK_THROWS_AS(mog::build_high_order(basis, DenseMatrix(3, 3)), mog::ShapeError);
}

TEST_CASE("multi-order aggregation matches the dense oracle") {
  std::mt19937_64 rng(99);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    mog::HeteroGraph g = random_graph(9, 3, seed);
    mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
    mog::SubsetEnumeration e = mog::enumerate_subsets(3);

    std::vector<DenseMatrix> alphas;
    for (const auto& [l, subset] : e.branches()) {
      alphas.push_back(row_stochastic(static_cast<std::size_t>(l), rng));
    }
    std::vector<double> beta(e.branch_count());
    double sum = 0.0;
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (double& b : beta) sum += (b = u(rng));
    for (double& b : beta) b /= sum;

    mog::HighOrderBasis basis = mog::assemble_basis(first, e, alphas);
    SparseMatrix got = mog::aggregate_multi_order(basis, beta);
    DenseMatrix expect = oracle::multi_order(dense_first_order(g), e, alphas, beta);
    CHECK(oracle::max_abs_diff(got, expect) < 1e-12);
  }
}

TEST_CASE("branch matrices and the aggregate satisfy the structural invariants") {
  std::mt19937_64 rng(123);
  mog::HeteroGraph g = random_graph(12, 3, 77);
  mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
  mog::SubsetEnumeration e = mog::enumerate_subsets(3);
  std::vector<DenseMatrix> alphas;
  for (const auto& [l, subset] : e.branches()) {
    alphas.push_back(row_stochastic(static_cast<std::size_t>(l), rng));
  }
  std::vector<double> beta(e.branch_count(), 1.0 / static_cast<double>(e.branch_count()));

  mog::HighOrderBasis basis = mog::assemble_basis(first, e, alphas);
  for (const auto& branch : basis.branches) {
    CHECK(branch.normalized == mog::transpose(branch.normalized));
    for (double v : branch.normalized.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
  SparseMatrix agg = mog::aggregate_multi_order(basis, beta);
  CHECK(agg == mog::transpose(agg));
  for (double v : agg.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("aggregate_multi_order validates beta") {
  mog::HeteroGraph g = random_graph(6, 2, 3);
  mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
  mog::SubsetEnumeration e = mog::enumerate_subsets(2);
  std::vector<DenseMatrix> alphas = {DenseMatrix(1, 1, {1.0}), DenseMatrix(1, 1, {1.0}),
                                     DenseMatrix(2, 2, {0.5, 0.5, 0.5, 0.5})};
  mog::HighOrderBasis basis = mog::assemble_basis(first, e, alphas);
  CHECK_THROWS_AS(mog::aggregate_multi_order(basis, std::vector<double>{0.5, 0.5, 0.5}),
                  mog::ArgumentError);
  CHECK_THROWS_AS(mog::aggregate_multi_order(basis, std::vector<double>{1.5, -0.5, 0.0}),
                  mog::ArgumentError);
  CHECK_THROWS_AS(mog::aggregate_multi_order(basis, std::vector<double>{1.0, 0.0}),
                  mog::ArgumentError);
}

TEST_CASE("branch_name joins meta-path names") {
  mog::HeteroGraph g = random_graph(6, 3, 3);
  mog::FirstOrderSet first = mog::build_first_order_set(g, g.meta_paths);
  CHECK(mog::branch_name(first, std::vector<int>{0}) == "M0");
  CHECK(mog::branch_name(first, std::vector<int>{0, 2}) == "M0*M2");
  CHECK(mog::branch_name(first, std::vector<int>{0, 1, 2}) == "M0*M1*M2");
}
