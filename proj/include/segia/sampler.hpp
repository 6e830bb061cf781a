#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "segia/graph.hpp"
#include "segia/matrix.hpp"

namespace segia {

/// Layered K-hop sample around a target set.
///
/// layers[0] is the target set and layers[k] = layers[k-1] ∪ S(layers[k-1]),
/// where S draws up to `fanout` neighbors of every node uniformly without
/// replacement. Each layer is sorted by node id; row/column i of the
/// inter-layer matrices refers to position i of the corresponding layer.
struct SampledNeighborhood {
  std::vector<std::vector<node_t>> layers;
  /// inter_layer[k-1] is the 0/1 matrix M^k of shape |layers[k-1]| x |layers[k]|
  /// restricting the adjacency to (layers[k-1], layers[k]).
  std::vector<CsrMatrix> inter_layer;
  /// Row-normalized copies of inter_layer.
  std::vector<CsrMatrix> normalized;
  /// zero_rows[k-1] lists the positions in layers[k-1] whose row of M^k is empty.
  std::vector<std::vector<std::size_t>> zero_rows;
  std::size_t fanout = 0;
  std::uint64_t seed = 0;

  std::size_t depth() const noexcept { return inter_layer.size(); }
  std::size_t layer_size(std::size_t k) const { return layers[k].size(); }
  /// Position of `node` inside layers[k], or -1.
  std::ptrdiff_t position(std::size_t k, node_t node) const;
};

SampledNeighborhood sample_neighborhood(const Topology& topology, std::span<const node_t> targets, std::size_t depth,
                                        std::size_t fanout, std::uint64_t seed);

/// Divides each nonzero row by its sum; zero rows stay zero.
CsrMatrix row_normalize(const CsrMatrix& m);

struct CostEstimate {
  std::uint64_t value;
  bool saturated;
};

/// |targets| * fanout^depth, saturating at the largest uint64.
CostEstimate sampling_cost_estimate(std::uint64_t targets, std::uint64_t fanout, std::uint64_t depth);

/// Layers and per-layer nnz, for debugging.
nlohmann::json to_debug_json(const SampledNeighborhood& nb);

}  // namespace segia
