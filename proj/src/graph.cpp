#include "segia/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <queue>
#include <random>
#include <string>

#include "segia/error.hpp"

namespace segia {

Topology::Topology(std::size_t n_nodes, std::span<const Edge> edges, std::vector<std::string>* warnings)
    : n_nodes_(n_nodes) {
  edges_.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u >= n_nodes || e.v >= n_nodes) {
      throw ValidationError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                            ") references a node outside [0, " + std::to_string(n_nodes) + ")");
    }
    if (e.u == e.v) {
      if (warnings) warnings->push_back("dropped self-loop on node " + std::to_string(e.u));
      continue;
    }
    edges_.push_back(e.u < e.v ? e : Edge{e.v, e.u});
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  offsets_.assign(n_nodes_ + 1, 0);
  for (const Edge& e : edges_) {
    ++offsets_[e.u + 1];
    ++offsets_[e.v + 1];
  }
  for (std::size_t i = 0; i < n_nodes_; ++i) offsets_[i + 1] += offsets_[i];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> next(offsets_.begin(), offsets_.end() - 1);
  for (const Edge& e : edges_) {
    adjacency_[next[e.u]++] = e.v;
    adjacency_[next[e.v]++] = e.u;
  }
  for (std::size_t u = 0; u < n_nodes_; ++u) {
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[u]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[u + 1]));
  }
}

bool Topology::has_edge(node_t u, node_t v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

namespace {

std::vector<node_t> sorted_unique(std::vector<node_t> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

struct Fnv1a {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
};

}  // namespace

AttributedGraph AttributedGraph::build(Topology topology, Matrix features, std::vector<int> labels,
                                       std::vector<node_t> labeled, std::vector<node_t> targets,
                                       std::optional<std::size_t> n_classes, std::vector<std::string> warnings) {
  const std::size_t n = topology.n_nodes();
  if (features.rows() != n) {
    throw DimensionError("feature matrix has " + std::to_string(features.rows()) + " rows for " +
                         std::to_string(n) + " nodes");
  }
  if (labels.size() != n) {
    throw DimensionError("label vector has " + std::to_string(labels.size()) + " entries for " +
                         std::to_string(n) + " nodes");
  }
  int max_label = -1;
  for (std::size_t u = 0; u < n; ++u) {
    if (labels[u] < 0) throw ValidationError("node " + std::to_string(u) + " has negative label");
    max_label = std::max(max_label, labels[u]);
  }
  const std::size_t classes = n_classes.value_or(static_cast<std::size_t>(max_label + 1));
  for (std::size_t u = 0; u < n; ++u) {
    if (static_cast<std::size_t>(labels[u]) >= classes) {
      throw ValidationError("node " + std::to_string(u) + " has label " + std::to_string(labels[u]) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
  }
  labeled = sorted_unique(std::move(labeled));
  targets = sorted_unique(std::move(targets));
  for (node_t id : labeled)
    if (id >= n) throw ValidationError("labeled index " + std::to_string(id) + " out of range");
  for (node_t id : targets)
    if (id >= n) throw ValidationError("target index " + std::to_string(id) + " out of range");
  std::vector<node_t> overlap;
  std::set_intersection(labeled.begin(), labeled.end(), targets.begin(), targets.end(), std::back_inserter(overlap));
  if (!overlap.empty()) {
    throw ValidationError("labeled and target sets share node " + std::to_string(overlap.front()));
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) throw ValidationError("feature matrix contains a non-finite value");
  }

  AttributedGraph g;
  g.feature_range_ = compute_feature_range(features);
  g.topology_ = std::move(topology);
  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  g.n_classes_ = classes;
  g.labeled_ = std::move(labeled);
  g.targets_ = std::move(targets);
  g.warnings_ = std::move(warnings);
  return g;
}

std::uint64_t AttributedGraph::fingerprint() const {
  Fnv1a f;
  f.value(n_nodes());
  for (const Edge& e : topology_.edges()) {
    f.value(e.u);
    f.value(e.v);
  }
  f.value(features_.rows());
  f.value(features_.cols());
  f.bytes(features_.values().data(), features_.size() * sizeof(double));
  f.bytes(labels_.data(), labels_.size() * sizeof(int));
  f.bytes(labeled_.data(), labeled_.size() * sizeof(node_t));
  f.bytes(targets_.data(), targets_.size() * sizeof(node_t));
  return f.h;
}

NormalizedAdjacency normalize_adjacency(const Topology& topology) {
  const std::size_t n = topology.n_nodes();
  NormalizedAdjacency out;
  out.degrees.resize(n);
  for (node_t u = 0; u < n; ++u) out.degrees[u] = static_cast<double>(topology.degree(u) + 1);

  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(2 * topology.n_edges() + n);
  values.reserve(2 * topology.n_edges() + n);
  for (node_t u = 0; u < n; ++u) {
    bool diagonal_done = false;
    const double du = out.degrees[u];
    for (node_t v : topology.neighbors(u)) {
      if (!diagonal_done && v > u) {
        col_idx.push_back(u);
        values.push_back(1.0 / du);
        diagonal_done = true;
      }
      col_idx.push_back(v);
      values.push_back(1.0 / std::sqrt(du * out.degrees[v]));
    }
    if (!diagonal_done) {
      col_idx.push_back(u);
      values.push_back(1.0 / du);
    }
    row_ptr[u + 1] = col_idx.size();
  }
  out.matrix = CsrMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::move(values));
  return out;
}

double average_degree(const AttributedGraph& g) {
  if (g.n_nodes() == 0) return 0.0;
  return static_cast<double>(g.n_edges()) / static_cast<double>(g.n_nodes());
}

namespace {

// Component id per node, numbered in order of their smallest member.
std::vector<std::size_t> component_ids(const Topology& t, std::size_t& n_components) {
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(t.n_nodes(), unset);
  n_components = 0;
  std::vector<node_t> stack;
  for (node_t s = 0; s < t.n_nodes(); ++s) {
    if (comp[s] != unset) continue;
    comp[s] = n_components;
    stack.push_back(s);
    while (!stack.empty()) {
      node_t u = stack.back();
      stack.pop_back();
      for (node_t v : t.neighbors(u)) {
        if (comp[v] == unset) {
          comp[v] = n_components;
          stack.push_back(v);
        }
      }
    }
    ++n_components;
  }
  return comp;
}

}  // namespace

bool is_connected(const Topology& topology) {
  std::size_t k = 0;
  component_ids(topology, k);
  return k == 1;
}

AttributedGraph largest_connected_component(const AttributedGraph& g) {
  if (g.n_nodes() == 0) throw ValidationError("largest_connected_component: empty graph");
  std::size_t k = 0;
  auto comp = component_ids(g.topology(), k);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t c : comp) ++sizes[c];
  // Ties go to the component holding the smallest node id.
  const std::size_t best = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

  constexpr node_t dropped = static_cast<node_t>(-1);
  std::vector<node_t> new_id(g.n_nodes(), dropped);
  std::vector<node_t> kept;
  for (node_t u = 0; u < g.n_nodes(); ++u) {
    if (comp[u] == best) {
      new_id[u] = static_cast<node_t>(kept.size());
      kept.push_back(u);
    }
  }
  std::vector<Edge> edges;
  for (const Edge& e : g.topology().edges()) {
    if (new_id[e.u] != dropped && new_id[e.v] != dropped) edges.push_back({new_id[e.u], new_id[e.v]});
  }
  std::vector<int> labels;
  labels.reserve(kept.size());
  for (node_t u : kept) labels.push_back(g.labels()[u]);
  auto remap = [&](const std::vector<node_t>& ids) {
    std::vector<node_t> out;
    for (node_t u : ids)
      if (new_id[u] != dropped) out.push_back(new_id[u]);
    return out;
  };
  return AttributedGraph::build(Topology(kept.size(), edges), g.features().gather_rows(kept), std::move(labels),
                                remap(g.labeled()), remap(g.targets()), g.n_classes(), g.warnings());
}

std::vector<FeatureBounds> compute_feature_range(const Matrix& features) {
  std::vector<FeatureBounds> range(features.cols(), FeatureBounds{0.0, 0.0});
  if (features.rows() == 0) return range;
  for (std::size_t d = 0; d < features.cols(); ++d) range[d] = {features(0, d), features(0, d)};
  for (std::size_t r = 1; r < features.rows(); ++r) {
    for (std::size_t d = 0; d < features.cols(); ++d) {
      range[d].min = std::min(range[d].min, features(r, d));
      range[d].max = std::max(range[d].max, features(r, d));
    }
  }
  return range;
}

Matrix clamp_features(const Matrix& x, std::span<const FeatureBounds> range) {
  if (range.size() != x.cols()) {
    throw DimensionError("clamp_features: " + std::to_string(range.size()) + " bounds for " +
                         std::to_string(x.cols()) + " feature columns");
  }
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t d = 0; d < row.size(); ++d) row[d] = std::clamp(row[d], range[d].min, range[d].max);
  }
  return out;
}

namespace {

void validate_spec(const SyntheticSpec& s) {
  if (s.n == 0 || s.c == 0) throw ValidationError("generate_synthetic: n and c must be positive");
  if (s.d < s.c) throw ValidationError("generate_synthetic: d must be at least c for orthogonal class means");
  if (!(s.p_out >= 0.0 && s.p_out < s.p_in && s.p_in <= 1.0)) {
    throw ValidationError("generate_synthetic: requires 0 <= p_out < p_in <= 1");
  }
  if (!(s.class_sep >= 0.0)) throw ValidationError("generate_synthetic: class_sep must be >= 0");
  if (!(s.labeled_fraction > 0.0 && s.labeled_fraction < 1.0) || !(s.target_fraction > 0.0 && s.target_fraction < 1.0)) {
    throw ValidationError("generate_synthetic: split fractions must lie in (0, 1)");
  }
}

}  // namespace

AttributedGraph generate_synthetic_raw(const SyntheticSpec& spec) {
  validate_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::vector<int> labels(spec.n);
  for (std::size_t u = 0; u < spec.n; ++u) labels[u] = static_cast<int>(u * spec.c / spec.n);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (node_t u = 0; u < spec.n; ++u) {
    for (node_t v = u + 1; v < spec.n; ++v) {
      const double p = labels[u] == labels[v] ? spec.p_in : spec.p_out;
      if (unit(rng) < p) edges.push_back({u, v});
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix x(spec.n, spec.d);
  for (std::size_t u = 0; u < spec.n; ++u) {
    for (std::size_t d = 0; d < spec.d; ++d) x(u, d) = noise(rng);
    x(u, static_cast<std::size_t>(labels[u])) += spec.class_sep;
  }
  return AttributedGraph::build(Topology(spec.n, edges), std::move(x), std::move(labels), {}, {}, spec.c);
}

AttributedGraph generate_synthetic(const SyntheticSpec& spec) {
  AttributedGraph lcc = largest_connected_component(generate_synthetic_raw(spec));
  const std::size_t n = lcc.n_nodes();
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::vector<node_t>> by_class(spec.c);
  for (node_t u = 0; u < n; ++u) by_class[static_cast<std::size_t>(lcc.labels()[u])].push_back(u);
  std::vector<node_t> labeled;
  std::vector<char> is_labeled(n, 0);
  for (auto& members : by_class) {
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(spec.labeled_fraction * static_cast<double>(members.size()))));
    for (std::size_t i = 0; i < std::min(take, members.size()); ++i) {
      labeled.push_back(members[i]);
      is_labeled[members[i]] = 1;
    }
  }
  std::vector<node_t> rest;
  for (node_t u = 0; u < n; ++u)
    if (!is_labeled[u]) rest.push_back(u);
  std::shuffle(rest.begin(), rest.end(), rng);
  const auto n_targets = std::min(
      rest.size(),
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(spec.target_fraction * static_cast<double>(n)))));
  std::vector<node_t> targets(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_targets));

  std::vector<int> labels = lcc.labels();
  return AttributedGraph::build(lcc.topology(), lcc.features(), std::move(labels), std::move(labeled),
                                std::move(targets), spec.c);
}

}  // namespace segia
