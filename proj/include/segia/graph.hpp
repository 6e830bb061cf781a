#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segia/matrix.hpp"

namespace segia {

struct Edge {
  node_t u;
  node_t v;
  auto operator<=>(const Edge&) const = default;
};

struct FeatureBounds {
  double min;
  double max;
  bool operator==(const FeatureBounds&) const = default;
};

/// Undirected simple graph. Each edge is stored once as (u, v) with u < v; the
/// neighbor index exposes both directions.
class Topology {
 public:
  Topology() = default;
  /// Symmetrizes, drops self-loops and duplicates. Dropped self-loops are
  /// appended to `warnings` when given.
  Topology(std::size_t n_nodes, std::span<const Edge> edges, std::vector<std::string>* warnings = nullptr);

  std::size_t n_nodes() const noexcept { return n_nodes_; }
  std::size_t n_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::span<const node_t> neighbors(node_t u) const {
    return {adjacency_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::size_t degree(node_t u) const { return offsets_[u + 1] - offsets_[u]; }
  bool has_edge(node_t u, node_t v) const;

  bool operator==(const Topology& other) const {
    return n_nodes_ == other.n_nodes_ && edges_ == other.edges_;
  }

 private:
  std::size_t n_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<node_t> adjacency_;
};

/// Attributed, labeled graph with the attacker's labeled and target splits.
/// Immutable once built.
class AttributedGraph {
 public:
  AttributedGraph() = default;

  /// Validates every invariant; throws ValidationError / DimensionError.
  /// `n_classes` defaults to max(label) + 1.
  static AttributedGraph build(Topology topology, Matrix features, std::vector<int> labels,
                               std::vector<node_t> labeled, std::vector<node_t> targets,
                               std::optional<std::size_t> n_classes = std::nullopt,
                               std::vector<std::string> warnings = {});

  const Topology& topology() const noexcept { return topology_; }
  std::size_t n_nodes() const noexcept { return topology_.n_nodes(); }
  std::size_t n_edges() const noexcept { return topology_.n_edges(); }
  std::size_t n_features() const noexcept { return features_.cols(); }
  std::size_t n_classes() const noexcept { return n_classes_; }

  const Matrix& features() const noexcept { return features_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<node_t>& labeled() const noexcept { return labeled_; }
  const std::vector<node_t>& targets() const noexcept { return targets_; }
  const std::vector<FeatureBounds>& feature_range() const noexcept { return feature_range_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// 64-bit FNV-1a over structure, features, labels and splits.
  std::uint64_t fingerprint() const;

 private:
  Topology topology_;
  Matrix features_;
  std::vector<int> labels_;
  std::size_t n_classes_ = 0;
  std::vector<node_t> labeled_;
  std::vector<node_t> targets_;
  std::vector<FeatureBounds> feature_range_;
  std::vector<std::string> warnings_;
};

/// Â = D̃^{-1/2}(A+I)D̃^{-1/2} with d̃_u = d_u + 1.
struct NormalizedAdjacency {
  CsrMatrix matrix;
  std::vector<double> degrees;
};

NormalizedAdjacency normalize_adjacency(const Topology& topology);

/// Edge count divided by node count, the "average degree" convention of the
/// public benchmark tables.
double average_degree(const AttributedGraph& g);

bool is_connected(const Topology& topology);

AttributedGraph largest_connected_component(const AttributedGraph& g);

/// Per-column bounds of a feature matrix.
std::vector<FeatureBounds> compute_feature_range(const Matrix& features);

Matrix clamp_features(const Matrix& x, std::span<const FeatureBounds> range);

struct SyntheticSpec {
  std::size_t n = 400;
  std::size_t c = 4;
  std::size_t d = 8;
  double p_in = 0.05;
  double p_out = 0.005;
  double class_sep = 2.0;
  std::uint64_t seed = 0;
  double labeled_fraction = 0.1;
  double target_fraction = 0.05;
};

/// Planted-partition sample before LCC extraction; splits are empty.
AttributedGraph generate_synthetic_raw(const SyntheticSpec& spec);
/// LCC of the planted-partition sample with stratified labeled and random target splits.
AttributedGraph generate_synthetic(const SyntheticSpec& spec);

struct GraphFiles {
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;
  std::filesystem::path splits;

  /// edges.csv, features.csv, labels.csv and splits.json inside `dir`.
  static GraphFiles in(const std::filesystem::path& dir);
};

AttributedGraph load_graph(const GraphFiles& files, std::optional<std::size_t> n_classes = std::nullopt);
void save_graph(const AttributedGraph& g, const GraphFiles& files);

}  // namespace segia
