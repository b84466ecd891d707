#include "mog/hetero.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace mog {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ifstream open_required(const fs::path& p) {
  if (!fs::exists(p)) throw NotFoundError("missing file: " + p.string());
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  return in;
}

// Yields non-comment, non-blank lines with their 1-based line numbers.
template <typename Fn>
void for_each_data_line(std::ifstream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    fn(line, lineno);
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_real(const std::string& s, const fs::path& file, std::size_t lineno) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file.string() + ":" + std::to_string(lineno) + ": bad real '" + s + "'");
  }
}

long long parse_int(const std::string& s, const fs::path& file, std::size_t lineno) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file.string() + ":" + std::to_string(lineno) + ": bad integer '" + s + "'");
  }
}

void check_disjoint(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                    const std::string& what) {
  std::unordered_set<std::size_t> seen(a.begin(), a.end());
  for (std::size_t i : b) {
    if (seen.count(i)) {
      throw ValidationError("split sets " + what + " overlap at node index " + std::to_string(i));
    }
  }
}

}  // namespace

const NodeType& HeteroGraph::type(int id) const {
  for (const auto& t : node_types) {
    if (t.id == id) return t;
  }
  throw ArgumentError("unknown node type id " + std::to_string(id));
}

const RelationMatrix& HeteroGraph::relation(int id) const {
  for (const auto& r : relations) {
    if (r.id == id) return r;
  }
  throw ArgumentError("unknown relation id " + std::to_string(id));
}

const DenseMatrix& HeteroGraph::target_features() const {
  const auto& t = target();
  if (!t.features) throw ValidationError("target type '" + t.name + "' has no features");
  return *t.features;
}

void validate(const HeteroGraph& g) {
  if (g.node_types.empty()) throw ValidationError("graph has no node types");
  if (g.node_types.size() + g.relations.size() <= 2) {
    throw ValidationError("heterogeneous graph needs |types| + |relations| > 2, got " +
                          std::to_string(g.node_types.size()) + " + " +
                          std::to_string(g.relations.size()));
  }
  for (const auto& t : g.node_types) {
    if (t.count < 1) throw ValidationError("node type '" + t.name + "' has count 0");
    if (t.features) {
      if (t.features->n_rows != t.count) {
        throw ValidationError("node type '" + t.name + "': feature rows " +
                              std::to_string(t.features->n_rows) + " != count " +
                              std::to_string(t.count));
      }
      for (double v : t.features->values) {
        if (!std::isfinite(v)) {
          throw ValidationError("node type '" + t.name + "': non-finite feature entry");
        }
      }
    }
  }
  for (const auto& r : g.relations) {
    const auto& src = g.type(r.src_type);
    const auto& dst = g.type(r.dst_type);
    if (r.matrix.n_rows != src.count || r.matrix.n_cols != dst.count) {
      throw ValidationError("relation '" + r.name + "': shape " +
                            shape_string(r.matrix.n_rows, r.matrix.n_cols) +
                            " does not match type counts " +
                            shape_string(src.count, dst.count));
    }
    for (double v : r.matrix.values) {
      if (v < 0.0) throw ValidationError("relation '" + r.name + "': negative edge weight");
    }
  }
  const auto& target = g.target();
  if (!target.features) {
    throw ValidationError("target type '" + target.name + "' must have features");
  }
  if (g.num_classes < 1) throw ValidationError("num_classes must be >= 1");
  if (g.labels.size() != target.count) {
    throw ValidationError("labels length " + std::to_string(g.labels.size()) +
                          " != target node count " + std::to_string(target.count));
  }
  for (std::size_t i = 0; i < g.labels.size(); ++i) {
    if (g.labels[i] < -1 || g.labels[i] >= g.num_classes) {
      throw ValidationError("label out of range at node index " + std::to_string(i));
    }
  }
  auto check_bounds = [&](const std::vector<std::size_t>& set, const std::string& name) {
    for (std::size_t i : set) {
      if (i >= target.count) {
        throw ValidationError(name + " split references node index " + std::to_string(i) +
                              " >= target count " + std::to_string(target.count));
      }
    }
  };
  check_bounds(g.splits.train, "train");
  check_bounds(g.splits.val, "val");
  check_bounds(g.splits.test, "test");
  if (g.splits.train.empty()) throw ValidationError("train split is empty");
  check_disjoint(g.splits.train, g.splits.val, "train/val");
  check_disjoint(g.splits.train, g.splits.test, "train/test");
  check_disjoint(g.splits.val, g.splits.test, "val/test");
  for (const auto& mp : g.meta_paths) {
    for (const auto& step : mp.chain) g.relation(step.relation);
  }
}

HeteroGraph load_dataset(const fs::path& dir) {
  HeteroGraph g;
  fs::path manifest_path = dir / "manifest.json";
  json manifest;
  {
    auto in = open_required(manifest_path);
    try {
      manifest = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(manifest_path.string() + ": " + e.what());
    }
  }
  try {
    for (const auto& jt : manifest.at("node_types")) {
      NodeType t;
      t.id = jt.at("id").get<int>();
      t.name = jt.at("name").get<std::string>();
      t.count = jt.at("count").get<std::size_t>();
      g.node_types.push_back(std::move(t));
    }
    for (const auto& jr : manifest.at("relations")) {
      RelationMatrix r;
      r.id = jr.at("id").get<int>();
      r.name = jr.at("name").get<std::string>();
      r.src_type = jr.at("src").get<int>();
      r.dst_type = jr.at("dst").get<int>();
      g.relations.push_back(std::move(r));
    }
    g.target_type = manifest.at("target_type").get<int>();
    g.num_classes = manifest.at("num_classes").get<int>();
    if (manifest.contains("meta_paths")) {
      for (const auto& jm : manifest.at("meta_paths")) {
        MetaPathSpec mp;
        mp.name = jm.at("name").get<std::string>();
        for (const auto& js : jm.at("chain")) {
          mp.chain.push_back({js.at("relation").get<int>(), js.at("transpose").get<bool>()});
        }
        g.meta_paths.push_back(std::move(mp));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }

  for (auto& t : g.node_types) {
    fs::path fpath = dir / ("features_" + t.name + ".tsv");
    bool is_target = (t.id == g.target_type);
    if (!fs::exists(fpath)) {
      if (is_target) throw NotFoundError("missing file: " + fpath.string());
      continue;
    }
    std::ifstream in = open_required(fpath);
    std::vector<double> vals;
    std::size_t cols = 0, rows = 0;
    for_each_data_line(in, [&](const std::string& line, std::size_t lineno) {
      auto fields = split_tabs(line);
      if (cols == 0) cols = fields.size();
      if (fields.size() != cols) {
        throw ParseError(fpath.string() + ":" + std::to_string(lineno) +
                         ": expected " + std::to_string(cols) + " fields");
      }
      for (const auto& f : fields) vals.push_back(parse_real(f, fpath, lineno));
      ++rows;
    });
    t.features = DenseMatrix(rows, cols, std::move(vals));
  }

  for (auto& r : g.relations) {
    fs::path rpath = dir / ("relation_" + std::to_string(r.id) + ".tsv");
    std::ifstream in = open_required(rpath);
    std::size_t src_count = g.type(r.src_type).count;
    std::size_t dst_count = g.type(r.dst_type).count;
    std::vector<Triplet> triplets;
    for_each_data_line(in, [&](const std::string& line, std::size_t lineno) {
      auto fields = split_tabs(line);
      if (fields.size() != 2 && fields.size() != 3) {
        throw ParseError(rpath.string() + ":" + std::to_string(lineno) +
                         ": expected 'src<TAB>dst[<TAB>weight]'");
      }
      long long src = parse_int(fields[0], rpath, lineno);
      long long dst = parse_int(fields[1], rpath, lineno);
      double w = fields.size() == 3 ? parse_real(fields[2], rpath, lineno) : 1.0;
      if (src < 0 || static_cast<std::size_t>(src) >= src_count) {
        throw ValidationError(rpath.string() + ":" + std::to_string(lineno) +
                              ": source node index " + fields[0] + " out of range [0, " +
                              std::to_string(src_count) + ")");
      }
      if (dst < 0 || static_cast<std::size_t>(dst) >= dst_count) {
        throw ValidationError(rpath.string() + ":" + std::to_string(lineno) +
                              ": destination node index " + fields[1] + " out of range [0, " +
                              std::to_string(dst_count) + ")");
      }
      triplets.push_back({static_cast<std::size_t>(src), static_cast<std::size_t>(dst), w});
    });
    r.matrix = SparseMatrix::from_triplets(src_count, dst_count, std::move(triplets));
  }

  std::size_t n = g.target_count();
  g.labels.assign(n, -1);
  {
    fs::path lpath = dir / "labels.tsv";
    std::ifstream in = open_required(lpath);
    for_each_data_line(in, [&](const std::string& line, std::size_t lineno) {
      auto fields = split_tabs(line);
      if (fields.size() != 2) {
        throw ParseError(lpath.string() + ":" + std::to_string(lineno) +
                         ": expected 'node<TAB>class'");
      }
      long long node = parse_int(fields[0], lpath, lineno);
      long long cls = parse_int(fields[1], lpath, lineno);
      if (node < 0 || static_cast<std::size_t>(node) >= n) {
        throw ValidationError(lpath.string() + ":" + std::to_string(lineno) +
                              ": node index " + fields[0] + " out of range");
      }
      g.labels[static_cast<std::size_t>(node)] = static_cast<int>(cls);
    });
  }
  {
    fs::path spath = dir / "splits.tsv";
    std::ifstream in = open_required(spath);
    for_each_data_line(in, [&](const std::string& line, std::size_t lineno) {
      auto fields = split_tabs(line);
      if (fields.size() != 2) {
        throw ParseError(spath.string() + ":" + std::to_string(lineno) +
                         ": expected 'node<TAB>{train|val|test}'");
      }
      long long node = parse_int(fields[0], spath, lineno);
      if (node < 0) {
        throw ValidationError(spath.string() + ":" + std::to_string(lineno) +
                              ": negative node index");
      }
      auto idx = static_cast<std::size_t>(node);
      if (fields[1] == "train") {
        g.splits.train.push_back(idx);
      } else if (fields[1] == "val") {
        g.splits.val.push_back(idx);
      } else if (fields[1] == "test") {
        g.splits.test.push_back(idx);
      } else {
        throw ParseError(spath.string() + ":" + std::to_string(lineno) +
                         ": unknown split '" + fields[1] + "'");
      }
    });
  }
  validate(g);
  return g;
}

void write_dataset(const HeteroGraph& g, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["node_types"] = json::array();
  for (const auto& t : g.node_types) {
    manifest["node_types"].push_back({{"id", t.id}, {"name", t.name}, {"count", t.count}});
  }
  manifest["relations"] = json::array();
  for (const auto& r : g.relations) {
    manifest["relations"].push_back(
        {{"id", r.id}, {"name", r.name}, {"src", r.src_type}, {"dst", r.dst_type}});
  }
  manifest["target_type"] = g.target_type;
  manifest["num_classes"] = g.num_classes;
  if (!g.meta_paths.empty()) {
    manifest["meta_paths"] = json::array();
    for (const auto& mp : g.meta_paths) {
      json chain = json::array();
      for (const auto& step : mp.chain) {
        chain.push_back({{"relation", step.relation}, {"transpose", step.transpose}});
      }
      manifest["meta_paths"].push_back({{"name", mp.name}, {"chain", chain}});
    }
  }
  {
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
  for (const auto& t : g.node_types) {
    if (!t.features) continue;
    std::ofstream out(dir / ("features_" + t.name + ".tsv"));
    for (std::size_t i = 0; i < t.features->n_rows; ++i) {
      for (std::size_t j = 0; j < t.features->n_cols; ++j) {
        if (j) out << '\t';
        out << fmt_real(t.features->at(i, j));
      }
      out << '\n';
    }
  }
  for (const auto& r : g.relations) {
    std::ofstream out(dir / ("relation_" + std::to_string(r.id) + ".tsv"));
    const auto& m = r.matrix;
    for (std::size_t i = 0; i < m.n_rows; ++i) {
      for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
        out << i << '\t' << m.col_indices[k] << '\t' << fmt_real(m.values[k]) << '\n';
      }
    }
  }
  {
    std::ofstream out(dir / "labels.tsv");
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
      if (g.labels[i] >= 0) out << i << '\t' << g.labels[i] << '\n';
    }
  }
  {
    std::ofstream out(dir / "splits.tsv");
    for (std::size_t i : g.splits.train) out << i << "\ttrain\n";
    for (std::size_t i : g.splits.val) out << i << "\tval\n";
    for (std::size_t i : g.splits.test) out << i << "\ttest\n";
  }
}

HeteroGraph generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.num_classes < 2) throw ArgumentError("generate_synthetic: need >= 2 classes");
  if (cfg.n_target < static_cast<std::size_t>(cfg.num_classes)) {
    throw ArgumentError("generate_synthetic: fewer target nodes than classes");
  }
  if (cfg.feature_dim < cfg.num_classes) {
    throw ArgumentError("generate_synthetic: feature_dim must be >= num_classes");
  }
  if (cfg.feature_noise < 0.0) throw ArgumentError("generate_synthetic: negative feature noise");
  if (cfg.relations.empty()) throw ArgumentError("generate_synthetic: no relations configured");
  for (const auto& r : cfg.relations) {
    if (r.aux_count < 1) throw ArgumentError("generate_synthetic: empty auxiliary type");
    if (r.p_in < 0.0 || r.p_in > 1.0 || r.p_out < 0.0 || r.p_out > 1.0) {
      throw ArgumentError("generate_synthetic: edge probability outside [0, 1]");
    }
  }

  HeteroGraph g;
  const std::size_t n = cfg.n_target;
  const int c = cfg.num_classes;
  g.target_type = 0;
  g.num_classes = c;

  g.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.labels[i] = static_cast<int>(i % c);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DenseMatrix x(n, static_cast<std::size_t>(cfg.feature_dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < cfg.feature_dim; ++j) {
      double centroid = (j == g.labels[i]) ? 1.0 : 0.0;
      x.at(i, static_cast<std::size_t>(j)) = centroid + cfg.feature_noise * gauss(rng);
    }
  }
  NodeType target;
  target.id = 0;
  target.name = "target";
  target.count = n;
  target.features = std::move(x);
  g.node_types.push_back(std::move(target));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t r = 0; r < cfg.relations.size(); ++r) {
    const auto& plan = cfg.relations[r];
    NodeType aux;
    aux.id = static_cast<int>(r + 1);
    aux.name = "aux" + std::to_string(r);
    aux.count = plan.aux_count;
    g.node_types.push_back(std::move(aux));

    std::vector<Triplet> edges;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < plan.aux_count; ++a) {
        int aux_class = static_cast<int>(a % static_cast<std::size_t>(c));
        double p = (g.labels[i] == aux_class) ? plan.p_in : plan.p_out;
        if (unit(rng) < p) edges.push_back({i, a, 1.0});
      }
    }
    RelationMatrix rel;
    rel.id = static_cast<int>(r);
    rel.name = "rel" + std::to_string(r);
    rel.src_type = 0;
    rel.dst_type = static_cast<int>(r + 1);
    rel.matrix = SparseMatrix::from_triplets(n, plan.aux_count, std::move(edges));
    g.relations.push_back(std::move(rel));

    MetaPathSpec mp;
    mp.name = "M" + std::to_string(r);
    mp.chain = {{static_cast<int>(r), false}, {static_cast<int>(r), true}};
    g.meta_paths.push_back(std::move(mp));
  }

  g.splits = split_nodes(n, cfg.split_ratios[0], cfg.split_ratios[1], cfg.split_ratios[2],
                         seed ^ 0x517cc1b727220a95ULL);
  validate(g);
  return g;
}

Splits split_nodes(std::size_t n, double train_ratio, double val_ratio, double test_ratio,
                   std::uint64_t seed) {
  if (train_ratio < 0.0 || val_ratio < 0.0 || test_ratio < 0.0) {
    throw ArgumentError("split_nodes: negative ratio");
  }
  double sum = train_ratio + val_ratio + test_ratio;
  if (sum > 1.0 + 1e-12) {
    throw ArgumentError("split_nodes: ratios sum to " + std::to_string(sum) + " > 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto take = [&](std::size_t start, std::size_t count) {
    return std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(start + count));
  };
  std::size_t n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n)));
  std::size_t n_val = static_cast<std::size_t>(std::floor(val_ratio * static_cast<double>(n)));
  std::size_t n_test = static_cast<std::size_t>(std::floor(test_ratio * static_cast<double>(n)));
  Splits s;
  s.train = take(0, n_train);
  s.val = take(n_train, n_val);
  s.test = take(n_train + n_val, n_test);
  return s;
}

}  // namespace mog
