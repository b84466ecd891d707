#include "mog/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace mog {

using nlohmann::json;

ModelParams ModelParams::init(const SubsetEnumeration& enumeration, std::size_t feature_dim,
                              std::size_t num_classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ModelParams p;
  for (const auto& [l, subset] : enumeration.branches()) {
    auto ls = static_cast<std::size_t>(l);
    DenseMatrix a(ls, ls);
    for (double& v : a.values) v = unit(rng);
    p.alpha_logits.push_back(std::move(a));
  }
  p.beta_logits.assign(p.alpha_logits.size(), 0.0);
  double bound = std::sqrt(6.0 / static_cast<double>(feature_dim + num_classes));
  std::uniform_real_distribution<double> glorot(-bound, bound);
  p.w = DenseMatrix(feature_dim, num_classes);
  for (double& v : p.w.values) v = glorot(rng);
  return p;
}

namespace {

std::vector<double> softmax_vector(std::span<const double> logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace

ForwardCache forward(const ModelParams& params, const HeteroGraph& g, const FirstOrderSet& first,
                     const SubsetEnumeration& enumeration, const FixedMixture* fixed) {
  ForwardCache cache;
  if (fixed) {
    cache.alphas = fixed->alphas;
    cache.beta = fixed->beta;
    cache.mixture_fixed = true;
  } else {
    std::size_t branches = enumeration.branch_count();
    if (params.alpha_logits.size() != branches || params.beta_logits.size() != branches) {
      throw ShapeError("forward: parameter groups sized for " +
                       std::to_string(params.alpha_logits.size()) + " branches, enumeration has " +
                       std::to_string(branches));
    }
    for (const auto& logits : params.alpha_logits) {
      cache.alphas.push_back(softmax_rows(logits));
    }
    cache.beta = softmax_vector(params.beta_logits);
  }
  cache.basis = assemble_basis(first, enumeration, cache.alphas);
  cache.multi_order = aggregate_multi_order(cache.basis, cache.beta);

  const DenseMatrix& x = g.target_features();
  if (params.w.n_rows != x.n_cols) {
    throw ShapeError("forward: W has " + std::to_string(params.w.n_rows) +
                     " rows but features have " + std::to_string(x.n_cols) + " columns");
  }
  cache.ax = spmm_sd(cache.multi_order, x);
  cache.z_raw = dense_matmul(cache.ax, params.w);
  cache.z = softmax_rows(cache.z_raw);
  cache.params_version = params.version;
  return cache;
}

double ce_loss(const ForwardCache& cache, std::span<const int> labels,
               std::span<const std::size_t> train_set) {
  if (train_set.empty()) throw ArgumentError("ce_loss: empty train set");
  const std::size_t c = cache.z.n_cols;
  double loss = 0.0;
  for (std::size_t i : train_set) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw DomainError("ce_loss: node " + std::to_string(i) + " has label " + std::to_string(y) +
                        " outside [0, " + std::to_string(c) + ")");
    }
    loss -= std::log(cache.z.at(i, static_cast<std::size_t>(y)));
  }
  return loss;
}

double total_loss(const ForwardCache& cache, std::span<const int> labels,
                  std::span<const std::size_t> train_set, const SemanticAdjacency* sem,
                  double gamma) {
  if (gamma < 0.0) throw ArgumentError("total_loss: gamma must be >= 0");
  double loss = ce_loss(cache, labels, train_set);
  if (gamma > 0.0 && sem != nullptr) {
    loss += gamma * rec_loss(cache.multi_order, *sem).value;
  }
  return loss;
}

namespace {

// dL/dA_hat for one branch propagated to the alpha-mixing coefficients.
// `grad_multi` is dL/d(multi-order adjacency); scaling by beta happens here.
void branch_alpha_gradient(const BranchBuild& branch, const FirstOrderSet& first,
                           const DenseMatrix& grad_multi, double beta_weight,
                           DenseMatrix& grad_alpha_out) {
  const std::size_t n = branch.normalized.n_rows;
  const auto l = static_cast<std::size_t>(branch.order);

  // Recover B = symmetrize(product) + I and the degree scalings.
  SparseMatrix sym = symmetrize(branch.product);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;
    for (std::size_t k = sym.row_offsets[i]; k < sym.row_offsets[i + 1]; ++k) {
      d += sym.values[k];
    }
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }

  // Degree chain term: c_i = -(s_i^3 / 2) * sum_j (G_ij + G_ji) B_ij s_j.
  std::vector<double> degree_term(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = sym.row_offsets[i]; k < sym.row_offsets[i + 1]; ++k) {
      std::size_t j = sym.col_indices[k];
      double b = sym.values[k] + (j == i ? 1.0 : 0.0);
      acc += (grad_multi.at(i, j) + grad_multi.at(j, i)) * b * inv_sqrt_deg[j];
    }
    // Diagonal self-loop of B when the product has no stored diagonal entry.
    if (sym.get(i, i) == 0.0) {
      acc += (grad_multi.at(i, i) + grad_multi.at(i, i)) * 1.0 * inv_sqrt_deg[i];
    }
    double s = inv_sqrt_deg[i];
    degree_term[i] = -0.5 * s * s * s * acc;
  }

  // dL/dB_ij = s_i s_j G_ij + c_i; B = U + I so dL/dU has the same entries.
  DenseMatrix grad_sym(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      grad_sym.at(i, j) = inv_sqrt_deg[i] * inv_sqrt_deg[j] * grad_multi.at(i, j) +
                          degree_term[i];
    }
  }

  // Through U = P + P^T - diag(P): off-diagonal picks up both orientations.
  DenseMatrix grad_product(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      grad_product.at(i, j) =
          (i == j) ? grad_sym.at(i, i) : grad_sym.at(i, j) + grad_sym.at(j, i);
    }
  }

  // Prefix/suffix factor products for the product rule.
  std::vector<SparseMatrix> prefix(l), suffix(l);
  for (std::size_t i = 0; i + 1 < l; ++i) {
    prefix[i + 1] = (i == 0) ? branch.factors[0] : spmm_ss(prefix[i], branch.factors[i]);
  }
  for (std::size_t i = l; i-- > 1;) {
    suffix[i - 1] =
        (i == l - 1) ? branch.factors[l - 1] : spmm_ss(branch.factors[i], suffix[i]);
  }

  for (std::size_t pos = 0; pos < l; ++pos) {
    DenseMatrix grad_factor;
    if (pos == 0) {
      grad_factor = grad_product;
    } else {
      grad_factor = spmm_sd(transpose(prefix[pos]), grad_product);
    }
    if (pos + 1 < l) {
      grad_factor = dense_transpose(spmm_sd(suffix[pos], dense_transpose(grad_factor)));
    }
    // d(factor)/d(alpha[pos][j]) is the j-th first-order matrix.
    for (std::size_t j = 0; j < l; ++j) {
      const SparseMatrix& a = first.matrices[static_cast<std::size_t>(branch.subset[j])];
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k) {
          dot += a.values[k] * grad_factor.at(r, a.col_indices[k]);
        }
      }
      grad_alpha_out.at(pos, j) = beta_weight * dot;
    }
  }
}

}  // namespace

Gradients backward(const ForwardCache& cache, const ModelParams& params, const HeteroGraph& g,
                   std::span<const int> labels, std::span<const std::size_t> train_set,
                   const SemanticAdjacency* sem, double gamma) {
  if (cache.params_version != params.version) {
    throw ContractError("backward: params mutated since forward (stale cache)");
  }
  const DenseMatrix& x = g.target_features();
  const std::size_t n = cache.z.n_rows;
  const std::size_t c = cache.z.n_cols;

  // Softmax + cross-entropy head.
  DenseMatrix dz(n, c);
  for (std::size_t i : train_set) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw DomainError("backward: label out of range at node " + std::to_string(i));
    }
    for (std::size_t j = 0; j < c; ++j) {
      dz.at(i, j) = cache.z.at(i, j) - (j == static_cast<std::size_t>(y) ? 1.0 : 0.0);
    }
  }

  Gradients grads;
  grads.w = dense_matmul(dense_transpose(cache.ax), dz);

  // dL/d(multi-order adjacency): low-rank CE part plus sparse semantic part.
  DenseMatrix feat_proj = dense_matmul(x, params.w);  // X W
  DenseMatrix grad_multi = dense_matmul(dz, dense_transpose(feat_proj));
  if (gamma > 0.0 && sem != nullptr && sem->matrix.nnz() > 0) {
    const SparseMatrix& s = sem->matrix;
    double scale = -gamma / static_cast<double>(s.nnz());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k) {
        double a = cache.multi_order.get(i, s.col_indices[k]);
        if (a > kRecLossEpsilon) grad_multi.at(i, s.col_indices[k]) += scale / a;
      }
    }
  }

  const std::size_t branches = cache.basis.branches.size();
  std::vector<double> grad_beta(branches, 0.0);
  for (std::size_t b = 0; b < branches; ++b) {
    const SparseMatrix& ahat = cache.basis.branches[b].normalized;
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = ahat.row_offsets[i]; k < ahat.row_offsets[i + 1]; ++k) {
        dot += ahat.values[k] * grad_multi.at(i, ahat.col_indices[k]);
      }
    }
    grad_beta[b] = dot;
  }

  grads.beta_logits.assign(branches, 0.0);
  for (std::size_t b = 0; b < branches; ++b) {
    grads.alpha_logits.emplace_back(cache.alphas[b].n_rows, cache.alphas[b].n_cols);
  }
  if (cache.mixture_fixed) return grads;

  // Softmax Jacobian onto beta logits.
  double beta_dot = 0.0;
  for (std::size_t b = 0; b < branches; ++b) beta_dot += grad_beta[b] * cache.beta[b];
  for (std::size_t b = 0; b < branches; ++b) {
    grads.beta_logits[b] = cache.beta[b] * (grad_beta[b] - beta_dot);
  }

  // Need the first-order set to form factor-coefficient gradients; it is
  // recoverable from the branch subsets only through the caller, so rebuild
  // a view from the order-1 branches (subset {j} factors are the normalized
  // first-order matrices themselves mixed with alpha = [1]).
  FirstOrderSet first;
  {
    std::size_t max_index = 0;
    for (const auto& b : cache.basis.branches) {
      for (int idx : b.subset) max_index = std::max(max_index, static_cast<std::size_t>(idx));
    }
    first.matrices.resize(max_index + 1);
    first.names.resize(max_index + 1);
    for (const auto& b : cache.basis.branches) {
      if (b.order == 1) first.matrices[static_cast<std::size_t>(b.subset[0])] = b.factors[0];
    }
  }

  for (std::size_t b = 0; b < branches; ++b) {
    const auto& branch = cache.basis.branches[b];
    DenseMatrix grad_alpha(cache.alphas[b].n_rows, cache.alphas[b].n_cols);
    branch_alpha_gradient(branch, first, grad_multi, cache.beta[b], grad_alpha);
    // Row-softmax Jacobian onto the alpha logits.
    const DenseMatrix& a = cache.alphas[b];
    for (std::size_t i = 0; i < a.n_rows; ++i) {
      double row_dot = 0.0;
      for (std::size_t j = 0; j < a.n_cols; ++j) row_dot += grad_alpha.at(i, j) * a.at(i, j);
      for (std::size_t j = 0; j < a.n_cols; ++j) {
        grads.alpha_logits[b].at(i, j) = a.at(i, j) * (grad_alpha.at(i, j) - row_dot);
      }
    }
  }
  return grads;
}

double FdReport::worst() const {
  return std::max({w.max_rel, beta.max_rel, alpha.max_rel});
}

namespace {

struct RunningCheck {
  double max_rel = 0.0;
  double sum_rel = 0.0;
  std::size_t count = 0;

  void add(double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
    double rel = std::abs(analytic - numeric) / denom;
    max_rel = std::max(max_rel, rel);
    sum_rel += rel;
    ++count;
  }
  GroupCheck done() const { return {max_rel, count ? sum_rel / static_cast<double>(count) : 0.0}; }
};

}  // namespace

FdReport finite_diff_check(const ModelParams& params, const HeteroGraph& g,
                           const FirstOrderSet& first, const SubsetEnumeration& enumeration,
                           const SemanticAdjacency* sem, double gamma, double step) {
  if (step <= 0.0) throw ArgumentError("finite_diff_check: step must be positive");
  ModelParams probe = params;
  auto loss_at = [&]() {
    ForwardCache cache = forward(probe, g, first, enumeration);
    return total_loss(cache, g.labels, g.splits.train, sem, gamma);
  };
  ForwardCache cache = forward(probe, g, first, enumeration);
  Gradients grads = backward(cache, probe, g, g.labels, g.splits.train, sem, gamma);

  auto central = [&](double& coord) {
    double saved = coord;
    coord = saved + step;
    double up = loss_at();
    coord = saved - step;
    double down = loss_at();
    coord = saved;
    return (up - down) / (2.0 * step);
  };

  FdReport report;
  RunningCheck w_check;
  for (std::size_t i = 0; i < probe.w.values.size(); ++i) {
    w_check.add(grads.w.values[i], central(probe.w.values[i]));
  }
  report.w = w_check.done();

  RunningCheck beta_check;
  for (std::size_t b = 0; b < probe.beta_logits.size(); ++b) {
    beta_check.add(grads.beta_logits[b], central(probe.beta_logits[b]));
  }
  report.beta = beta_check.done();

  RunningCheck alpha_check;
  for (std::size_t b = 0; b < probe.alpha_logits.size(); ++b) {
    for (std::size_t i = 0; i < probe.alpha_logits[b].values.size(); ++i) {
      alpha_check.add(grads.alpha_logits[b].values[i], central(probe.alpha_logits[b].values[i]));
    }
  }
  report.alpha = alpha_check.done();
  return report;
}

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

json dense_to_json(const DenseMatrix& m) {
  return json{{"shape", {m.n_rows, m.n_cols}}, {"values", m.values}};
}

DenseMatrix dense_from_json(const json& j) {
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw ParseError("checkpoint: bad dense shape");
  return DenseMatrix(shape[0], shape[1], j.at("values").get<std::vector<double>>());
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json j;
  j["max_order"] = ckpt.max_order;
  j["feature_dim"] = ckpt.feature_dim;
  j["num_classes"] = ckpt.num_classes;
  j["config_hash"] = ckpt.config_hash;
  j["first_order_names"] = ckpt.first_order_names;
  j["w"] = dense_to_json(ckpt.params.w);
  j["beta_logits"] = ckpt.params.beta_logits;
  j["alpha_logits"] = json::array();
  for (const auto& a : ckpt.params.alpha_logits) j["alpha_logits"].push_back(dense_to_json(a));
  if (ckpt.fixed_mixture) {
    json fm;
    fm["beta"] = ckpt.fixed_mixture->beta;
    fm["alphas"] = json::array();
    for (const auto& a : ckpt.fixed_mixture->alphas) fm["alphas"].push_back(dense_to_json(a));
    j["fixed_mixture"] = std::move(fm);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("missing file: " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());  // message carries the byte offset
  }
  try {
    Checkpoint ckpt;
    ckpt.max_order = j.at("max_order").get<int>();
    ckpt.feature_dim = j.at("feature_dim").get<std::size_t>();
    ckpt.num_classes = j.at("num_classes").get<std::size_t>();
    ckpt.config_hash = j.at("config_hash").get<std::uint64_t>();
    ckpt.first_order_names = j.at("first_order_names").get<std::vector<std::string>>();
    ckpt.params.w = dense_from_json(j.at("w"));
    ckpt.params.beta_logits = j.at("beta_logits").get<std::vector<double>>();
    for (const auto& a : j.at("alpha_logits")) {
      ckpt.params.alpha_logits.push_back(dense_from_json(a));
    }
    if (j.contains("fixed_mixture")) {
      FixedMixture fm;
      fm.beta = j.at("fixed_mixture").at("beta").get<std::vector<double>>();
      for (const auto& a : j.at("fixed_mixture").at("alphas")) {
        fm.alphas.push_back(dense_from_json(a));
      }
      ckpt.fixed_mixture = std::move(fm);
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace mog
