#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "segia/attack.hpp"
#include "segia/graph.hpp"
#include "segia/matrix.hpp"
#include "segia/surrogate.hpp"

namespace segia {

/// h_u = sim(r_u, x_u) with r_u = sum_{j in N(u)} x_j / sqrt(d_j d_u), degrees
/// without self-loops. Empty for an isolated node.
std::optional<double> node_homophily(const Topology& topology, const Matrix& features, node_t u);

struct HomophilyProfile {
  std::vector<double> scores;  // one per scored node, ascending node id
  std::vector<node_t> scored;
  std::vector<node_t> isolated;
  std::uint64_t fingerprint = 0;
};

HomophilyProfile homophily_profile(const Topology& topology, const Matrix& features);

enum class DistanceMetric { Wasserstein1, TotalVariation };

std::string_view to_string(DistanceMetric m);
DistanceMetric parse_distance_metric(std::string_view s);

/// Wasserstein-1 between empirical distributions (both resampled to the
/// larger size through their quantile functions), or half the L1 distance
/// between 50-bin histograms on [-1, 1].
double homophily_distance(const HomophilyProfile& a, const HomophilyProfile& b, DistanceMetric metric);
double homophily_distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric);

struct DefenseReport {
  double epsilon = -1.0;
  std::vector<Edge> pruned_edges;
  std::size_t injected_edges = 0;
  std::size_t surviving_injected_edges = 0;
  std::string logits_source;
};

struct DefendedGraph {
  Topology topology;
  DefenseReport report;
};

/// Single pass: every edge with sim(x_u, x_v) < epsilon is removed, all edges
/// judged against the same input features. Nodes with id >= n_original count
/// as injected.
DefendedGraph prune_defense(const Topology& topology, const Matrix& features, double epsilon,
                            std::size_t n_original);
DefendedGraph prune_defense(const AttributedGraph& g, double epsilon);
DefendedGraph prune_defense(const AttackedGraph& g, double epsilon);

/// Fraction of `targets` whose predicted class differs from `labels`.
double misclassification_rate(const SurrogateModel& model, const Topology& topology, const Matrix& features,
                              std::span<const node_t> targets, std::span<const int> labels);

struct Theorem1Options {
  std::size_t n_seeds = 10;
  std::size_t edges_per_node = 3;
  double defense_epsilon = 0.1;
  /// Pruning threshold of the surrogate the comparator optimizes against. The
  /// default -1 is a conventional attack that does not anticipate pruning.
  double comparator_epsilon = -1.0;
};

struct Theorem1Seed {
  std::uint64_t seed = 0;
  double dis_segia_w1 = 0.0;
  double dis_gia_w1 = 0.0;
  double dis_segia_tv = 0.0;
  double dis_gia_tv = 0.0;
  double defended_loss_segia = 0.0;
  double defended_loss_gia = 0.0;
  std::size_t surviving_segia = 0;
  std::size_t injected_edges_segia = 0;
  std::size_t surviving_gia = 0;
  std::size_t injected_edges_gia = 0;
  bool homophily_holds = false;
  bool loss_holds = false;
};

struct Theorem1Report {
  std::vector<Theorem1Seed> seeds;
  double homophily_rate = 0.0;  // fraction of seeds with dis(SEGIA) <= dis(GIA), Wasserstein-1
  double homophily_rate_tv = 0.0;
  double loss_rate = 0.0;  // fraction of seeds with defended L_atk(SEGIA) <= L_atk(GIA)
};

/// L_atk on a defended graph: plain SGC with the surrogate weights over the
/// defended topology, similarity term over the primary anchors.
double defended_attack_loss(const AttributedGraph& base, const AttackedGraph& attacked, const Topology& defended,
                            const SurrogateModel& model, const AttackConfig& cfg);

/// Paired SEGIA vs multi-edge (alpha = 0) runs for seeds derived from cfg.seed.
/// The comparator uses opts.comparator_epsilon as its surrogate threshold.
/// Throws PreconditionError when the graph is disconnected, has an isolated
/// node or a class without a labeled node.
Theorem1Report theorem1_check(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg,
                              const Theorem1Options& opts);

nlohmann::json to_json(const DefenseReport& r);
nlohmann::json to_json(const Theorem1Report& r);

}  // namespace segia
