#include "segia/sampler.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <string>

#include "segia/error.hpp"

namespace segia {

std::ptrdiff_t SampledNeighborhood::position(std::size_t k, node_t node) const {
  const auto& layer = layers.at(k);
  auto it = std::lower_bound(layer.begin(), layer.end(), node);
  if (it == layer.end() || *it != node) return -1;
  return it - layer.begin();
}

CsrMatrix row_normalize(const CsrMatrix& m) {
  CsrMatrix out = m;
  auto& values = out.values();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t k = out.row_ptr()[r]; k < out.row_ptr()[r + 1]; ++k) sum += values[k];
    if (sum == 0.0) continue;
    for (std::size_t k = out.row_ptr()[r]; k < out.row_ptr()[r + 1]; ++k) values[k] /= sum;
  }
  return out;
}

namespace {

// M^k: rows follow `inner`, columns follow `outer`, entry 1 iff A[u][v] = 1.
CsrMatrix connectivity(const Topology& t, const std::vector<node_t>& inner, const std::vector<node_t>& outer) {
  std::vector<std::size_t> row_ptr(inner.size() + 1, 0);
  std::vector<std::size_t> col_idx;
  for (std::size_t r = 0; r < inner.size(); ++r) {
    // Both lists are sorted, so a merge finds the intersection in order.
    auto nb = t.neighbors(inner[r]);
    std::size_t i = 0, j = 0;
    while (i < nb.size() && j < outer.size()) {
      if (nb[i] < outer[j]) {
        ++i;
      } else if (outer[j] < nb[i]) {
        ++j;
      } else {
        col_idx.push_back(j);
        ++i;
        ++j;
      }
    }
    row_ptr[r + 1] = col_idx.size();
  }
  std::vector<double> values(col_idx.size(), 1.0);
  return CsrMatrix(inner.size(), outer.size(), std::move(row_ptr), std::move(col_idx), std::move(values));
}

}  // namespace

SampledNeighborhood sample_neighborhood(const Topology& topology, std::span<const node_t> targets, std::size_t depth,
                                        std::size_t fanout, std::uint64_t seed) {
  if (targets.empty()) throw ValidationError("sample_neighborhood: empty target set");
  if (depth < 1) throw ValidationError("sample_neighborhood: depth must be >= 1");
  if (fanout < 1) throw ValidationError("sample_neighborhood: fanout must be >= 1");
  for (node_t t : targets) {
    if (t >= topology.n_nodes()) throw ValidationError("sample_neighborhood: target " + std::to_string(t) + " outside graph");
  }

  SampledNeighborhood nb;
  nb.fanout = fanout;
  nb.seed = seed;
  std::vector<node_t> base(targets.begin(), targets.end());
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  nb.layers.push_back(std::move(base));

  std::mt19937_64 rng(seed);
  std::vector<node_t> pool;
  for (std::size_t k = 1; k <= depth; ++k) {
    const auto& prev = nb.layers.back();
    std::vector<node_t> next = prev;
    for (node_t u : prev) {
      auto nbrs = topology.neighbors(u);
      if (nbrs.size() <= fanout) {
        next.insert(next.end(), nbrs.begin(), nbrs.end());
        continue;
      }
      // Partial Fisher-Yates: the first `fanout` slots become a uniform
      // sample without replacement.
      pool.assign(nbrs.begin(), nbrs.end());
      for (std::size_t i = 0; i < fanout; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      next.insert(next.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(fanout));
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    nb.layers.push_back(std::move(next));
  }

  for (std::size_t k = 1; k <= depth; ++k) {
    CsrMatrix m = connectivity(topology, nb.layers[k - 1], nb.layers[k]);
    std::vector<std::size_t> zero;
    for (std::size_t r = 0; r < m.rows(); ++r)
      if (m.row_ptr()[r] == m.row_ptr()[r + 1]) zero.push_back(r);
    nb.normalized.push_back(row_normalize(m));
    nb.inter_layer.push_back(std::move(m));
    nb.zero_rows.push_back(std::move(zero));
  }
  return nb;
}

CostEstimate sampling_cost_estimate(std::uint64_t targets, std::uint64_t fanout, std::uint64_t depth) {
  if (targets < 1 || fanout < 1 || depth < 1) throw ValidationError("sampling_cost_estimate: arguments must be >= 1");
  constexpr std::uint64_t cap = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t value = targets;
  for (std::uint64_t k = 0; k < depth; ++k) {
    if (value > cap / fanout) return {cap, true};
    value *= fanout;
  }
  return {value, false};
}

nlohmann::json to_debug_json(const SampledNeighborhood& nb) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : nb.layers) layers.push_back(l);
  nlohmann::json nnz = nlohmann::json::array();
  for (const auto& m : nb.inter_layer) nnz.push_back(m.nnz());
  nlohmann::json zero = nlohmann::json::array();
  for (const auto& z : nb.zero_rows) zero.push_back(z.size());
  return {{"depth", nb.depth()}, {"fanout", nb.fanout}, {"seed", nb.seed},
          {"layers", layers},   {"nnz", nnz},           {"zero_rows", zero}};
}

}  // namespace segia
