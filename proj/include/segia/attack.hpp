#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "segia/error.hpp"
#include "segia/graph.hpp"
#include "segia/matrix.hpp"
#include "segia/sampler.hpp"
#include "segia/surrogate.hpp"
#include "segia/synthesizer.hpp"

namespace segia {

enum class AnchorRule { TargetSelf, BestGradient };
enum class LabelMode { GroundTruth, Predicted };

std::string_view to_string(AnchorRule r);
AnchorRule parse_anchor_rule(std::string_view s);
std::string_view to_string(LabelMode m);
LabelMode parse_label_mode(std::string_view s);

struct AttackConfig {
  double alpha = 1.0;
  double epsilon = 0.1;
  std::size_t depth = 2;
  std::size_t fanout = 10;
  std::uint64_t seed = 0;
  std::size_t iterations = 200;
  double step_size = 0.05;
  double perturbation_rate = 0.05;
  AnchorRule anchor_rule = AnchorRule::TargetSelf;
  LabelMode label_mode = LabelMode::GroundTruth;

  /// T >= 1, step >= 0 (0 only freezes the generator), Pr in (0, 1], alpha >= 0.
  void validate() const;
};

nlohmann::json to_json(const AttackConfig& cfg);
AttackConfig attack_config_from_json(const nlohmann::json& j, AttackConfig defaults = {});

/// Injected node i has id N + i in the composed graph. Every injected node owns
/// at least one edge to an original node; the single-edge attack owns exactly one.
struct InjectionPlan {
  std::size_t n_injected = 0;
  Matrix features;                      // N_I x D
  std::vector<node_t> assigned_target;  // target each injected node serves
  std::vector<node_t> anchors;          // primary anchor j(i)
  std::vector<std::vector<node_t>> extra_anchors;  // multi-edge baseline only

  std::size_t edge_count() const;
  /// (injected index, original node) pairs, primary anchor first.
  std::vector<std::pair<std::size_t, node_t>> edges() const;
  bool single_edge() const { return edge_count() == n_injected; }

  /// Checks the structural invariants against the base graph; throws ValidationError.
  void validate(const AttributedGraph& base, bool require_single_edge) const;
};

/// G' = (A', X') with injected nodes appended after the originals.
struct AttackedGraph {
  std::size_t n_original = 0;
  InjectionPlan plan;
  Topology topology;
  Matrix features;

  std::size_t n_nodes() const noexcept { return topology.n_nodes(); }
  std::size_t n_edges() const noexcept { return topology.n_edges(); }
  bool is_injected(node_t u) const noexcept { return u >= n_original; }
};

AttackedGraph compose(const AttributedGraph& base, InjectionPlan plan);

/// Composed graph as an AttributedGraph for export; injected nodes carry the
/// label of their primary anchor and belong to neither split.
AttributedGraph to_attributed(const AttributedGraph& base, const AttackedGraph& attacked);

struct InjectionAssignment {
  std::size_t n_injected = 0;
  /// Round-robin over the targets in ascending id order.
  std::vector<node_t> target_of;
};

/// N_I = ceil(Pr * N).
InjectionAssignment plan_injections(const AttributedGraph& g, const AttackConfig& cfg);

/// Candidate anchors for an injected node serving `target`: the target plus
/// its neighbors present in the first sampled layer.
std::vector<node_t> anchor_candidates(const AttributedGraph& g, const SampledNeighborhood& nb, node_t target);

/// Per-node norm of dL_tgt/dX_v on the clean graph under the surrogate (with
/// the attack's pruning threshold).
std::vector<double> influence_norms(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg);

node_t select_anchor(const AttributedGraph& g, const SampledNeighborhood& nb, const SurrogateModel& model,
                     node_t target, AnchorRule rule, const AttackConfig& cfg);

/// Labels used by L_tgt: ground truth or the model's clean predictions.
std::vector<int> attack_labels(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg);

/// L_atk = -L_tgt(G', V_t) - alpha * sum_i sim(x_{u_i}, x_{j(i)}), with L_tgt
/// evaluated by the linear surrogate over (Â' ⊙ P')² and P' recomputed from
/// the composed features with cfg.epsilon.
double attack_loss(const AttributedGraph& base, const AttackedGraph& attacked, const SurrogateModel& model,
                   const AttackConfig& cfg);

/// d L_atk / d X_I (N_I x D). The pruning mask is piecewise constant and
/// treated as such.
Matrix attack_gradient(const AttributedGraph& base, const AttackedGraph& attacked, const SurrogateModel& model,
                       const AttackConfig& cfg);

struct AttackTrace {
  std::vector<double> loss;
  std::size_t best_iteration = 0;
  double best_loss = 0.0;
  std::size_t zero_rows = 0;  // empty rows across the sampled M^k
};

/// Thrown when the attack loss becomes non-finite; carries the trace so far.
class AttackDivergence : public DivergenceError {
 public:
  AttackDivergence(const std::string& what, AttackTrace trace) : DivergenceError(what), trace(std::move(trace)) {}
  AttackTrace trace;
};

struct AttackResult {
  AttackedGraph graph;
  AttackTrace trace;
};

/// Single-edge graph injection attack against a linear surrogate.
AttackResult run_segia(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg);

/// Single-edge control: features uniform within the clean feature range.
AttackedGraph run_baseline_random(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg);

/// Conventional multi-edge comparator: same optimization with alpha forced to
/// 0 and `edges_per_node` anchors per injected node (the single-edge anchor
/// first, then the highest-influence nodes within K hops of the target).
AttackResult run_baseline_multiedge(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg,
                                    std::size_t edges_per_node);

nlohmann::json to_json(const InjectionPlan& plan);
InjectionPlan plan_from_json(const nlohmann::json& j);

}  // namespace segia
