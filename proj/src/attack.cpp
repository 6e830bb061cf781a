#include "segia/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <string>

#include "segia/kernels.hpp"
#include "segia/seed.hpp"

namespace segia {

std::string_view to_string(AnchorRule r) {
  return r == AnchorRule::TargetSelf ? "target-self" : "best-gradient";
}

AnchorRule parse_anchor_rule(std::string_view s) {
  if (s == "target-self") return AnchorRule::TargetSelf;
  if (s == "best-gradient") return AnchorRule::BestGradient;
  throw ValidationError("unknown anchor rule '" + std::string(s) + "'");
}

std::string_view to_string(LabelMode m) {
  return m == LabelMode::GroundTruth ? "ground-truth" : "predicted";
}

LabelMode parse_label_mode(std::string_view s) {
  if (s == "ground-truth") return LabelMode::GroundTruth;
  if (s == "predicted") return LabelMode::Predicted;
  throw ValidationError("unknown label mode '" + std::string(s) + "'");
}

void AttackConfig::validate() const {
  if (iterations < 1) throw ValidationError("attack: iterations must be >= 1");
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw ValidationError("attack: step size must be >= 0");
  if (!(perturbation_rate > 0.0 && perturbation_rate <= 1.0)) {
    throw ValidationError("attack: perturbation rate must lie in (0, 1]");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("attack: alpha must be >= 0");
  if (!(epsilon >= -1.0 && epsilon <= 1.0)) throw ValidationError("attack: epsilon must lie in [-1, 1]");
  if (depth < 1 || fanout < 1) throw ValidationError("attack: depth and fanout must be >= 1");
}

nlohmann::json to_json(const AttackConfig& cfg) {
  return {{"alpha", cfg.alpha},
          {"epsilon", cfg.epsilon},
          {"K", cfg.depth},
          {"m", cfg.fanout},
          {"seed", cfg.seed},
          {"T", cfg.iterations},
          {"step_size", cfg.step_size},
          {"perturbation_rate", cfg.perturbation_rate},
          {"anchor_rule", to_string(cfg.anchor_rule)},
          {"label_mode", to_string(cfg.label_mode)}};
}

AttackConfig attack_config_from_json(const nlohmann::json& j, AttackConfig cfg) {
  try {
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
    if (j.contains("K")) cfg.depth = j.at("K").get<std::size_t>();
    if (j.contains("m")) cfg.fanout = j.at("m").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("T")) cfg.iterations = j.at("T").get<std::size_t>();
    if (j.contains("step_size")) cfg.step_size = j.at("step_size").get<double>();
    if (j.contains("perturbation_rate")) cfg.perturbation_rate = j.at("perturbation_rate").get<double>();
    if (j.contains("anchor_rule")) cfg.anchor_rule = parse_anchor_rule(j.at("anchor_rule").get<std::string>());
    if (j.contains("label_mode")) cfg.label_mode = parse_label_mode(j.at("label_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("attack config: ") + e.what());
  }
  return cfg;
}

std::size_t InjectionPlan::edge_count() const {
  std::size_t n = anchors.size();
  for (const auto& extra : extra_anchors) n += extra.size();
  return n;
}

std::vector<std::pair<std::size_t, node_t>> InjectionPlan::edges() const {
  std::vector<std::pair<std::size_t, node_t>> out;
  for (std::size_t i = 0; i < n_injected; ++i) {
    out.emplace_back(i, anchors[i]);
    if (i < extra_anchors.size())
      for (node_t a : extra_anchors[i]) out.emplace_back(i, a);
  }
  return out;
}

void InjectionPlan::validate(const AttributedGraph& base, bool require_single_edge) const {
  if (anchors.size() != n_injected || assigned_target.size() != n_injected) {
    throw ValidationError("plan: anchor/target maps must have one entry per injected node");
  }
  if (!extra_anchors.empty() && extra_anchors.size() != n_injected) {
    throw ValidationError("plan: extra anchor lists must have one entry per injected node");
  }
  if (features.rows() != n_injected || features.cols() != base.n_features()) {
    throw DimensionError("plan: injected feature matrix has the wrong shape");
  }
  for (std::size_t i = 0; i < n_injected; ++i) {
    std::vector<node_t> mine{anchors[i]};
    if (!extra_anchors.empty()) mine.insert(mine.end(), extra_anchors[i].begin(), extra_anchors[i].end());
    for (node_t a : mine) {
      if (a >= base.n_nodes()) throw ValidationError("plan: anchor " + std::to_string(a) + " is not an original node");
    }
    std::sort(mine.begin(), mine.end());
    if (std::adjacent_find(mine.begin(), mine.end()) != mine.end()) {
      throw ValidationError("plan: injected node " + std::to_string(i) + " repeats an anchor");
    }
    if (require_single_edge && mine.size() != 1) {
      throw ValidationError("plan: injected node " + std::to_string(i) + " has " + std::to_string(mine.size()) +
                            " edges, single-edge budget allows 1");
    }
  }
  const auto& range = base.feature_range();
  for (std::size_t i = 0; i < n_injected; ++i) {
    for (std::size_t d = 0; d < features.cols(); ++d) {
      const double v = features(i, d);
      if (!(v >= range[d].min && v <= range[d].max)) {
        throw ValidationError("plan: injected feature (" + std::to_string(i) + "," + std::to_string(d) +
                              ") outside the clean feature range");
      }
    }
  }
}

AttackedGraph compose(const AttributedGraph& base, InjectionPlan plan) {
  const std::size_t n = base.n_nodes();
  if (plan.features.rows() != plan.n_injected || plan.features.cols() != base.n_features()) {
    throw DimensionError("compose: injected feature matrix has the wrong shape");
  }
  std::vector<Edge> edges = base.topology().edges();
  for (auto [i, anchor] : plan.edges()) {
    if (anchor >= n) throw ValidationError("compose: anchor outside the original graph");
    edges.push_back({anchor, static_cast<node_t>(n + i)});
  }
  AttackedGraph out;
  out.n_original = n;
  out.topology = Topology(n + plan.n_injected, edges);
  out.features = Matrix(n + plan.n_injected, base.n_features());
  std::copy(base.features().values().begin(), base.features().values().end(), out.features.values().begin());
  std::copy(plan.features.values().begin(), plan.features.values().end(),
            out.features.values().begin() + static_cast<std::ptrdiff_t>(base.features().size()));
  out.plan = std::move(plan);
  return out;
}

AttributedGraph to_attributed(const AttributedGraph& base, const AttackedGraph& attacked) {
  std::vector<int> labels = base.labels();
  for (node_t a : attacked.plan.anchors) labels.push_back(base.labels()[a]);
  return AttributedGraph::build(attacked.topology, attacked.features, std::move(labels), base.labeled(),
                                base.targets(), base.n_classes());
}

InjectionAssignment plan_injections(const AttributedGraph& g, const AttackConfig& cfg) {
  cfg.validate();
  if (g.targets().empty()) throw ValidationError("plan_injections: empty target set");
  // The relative slack keeps products such as 0.07 * 100 from rounding up.
  const double raw = cfg.perturbation_rate * static_cast<double>(g.n_nodes());
  const auto n_injected = static_cast<std::size_t>(std::ceil(raw * (1.0 - 1e-12)));
  InjectionAssignment a;
  a.n_injected = std::max<std::size_t>(n_injected, 1);
  a.target_of.resize(a.n_injected);
  for (std::size_t i = 0; i < a.n_injected; ++i) a.target_of[i] = g.targets()[i % g.targets().size()];
  return a;
}

namespace {

void require_linear(const SurrogateModel& model) {
  if (!model.is_linear()) throw PreconditionError("the attack needs a linear surrogate (SGC or PrSGC)");
}

// The attack always views the surrogate weights through Â ⊙ P with its own threshold.
SurrogateModel attack_view(const SurrogateModel& model, double epsilon) {
  require_linear(model);
  SurrogateModel view = model;
  view.variant = Variant::PrSGC;
  view.epsilon = epsilon;
  return view;
}

struct LossParts {
  double loss = 0.0;
  double target_loss = 0.0;
  double similarity = 0.0;
  Matrix grad;  // N_I x D, only when requested
};

// L_atk and optionally its gradient for a composed graph whose normalized
// adjacency has already been computed.
LossParts evaluate_attack(const NormalizedAdjacency& adj, const AttackedGraph& ag, const Matrix& weights, double alpha,
                          double epsilon, std::span<const node_t> targets, std::span<const int> labels,
                          bool want_grad) {
  const CsrMatrix prop = masked_adjacency(adj, build_pruning_mask(ag.topology, ag.features, epsilon));
  const Matrix logits = kernels::spmm(prop, kernels::spmm(prop, kernels::gemm(ag.features, weights)));
  LossParts out;
  Matrix dlogits;
  if (want_grad) dlogits = Matrix(logits.rows(), logits.cols());
  for (node_t t : targets) {
    auto ce = softmax_cross_entropy(logits.row(t), labels[t]);
    out.target_loss += ce.loss;
    if (want_grad) {
      // d(-L_tgt)/dZ_t
      auto dst = dlogits.row(t);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] -= ce.grad[c];
    }
  }
  const std::size_t n = ag.n_original;
  const auto& plan = ag.plan;
  for (std::size_t i = 0; i < plan.n_injected; ++i) {
    out.similarity += cosine_sim(ag.features.row(n + i), ag.features.row(plan.anchors[i]));
  }
  out.loss = -out.target_loss - alpha * out.similarity;
  if (!want_grad) return out;

  // Â ⊙ P is symmetric, so (Â⊙P)^T(Â⊙P)^T G = (Â⊙P)² G.
  const Matrix back = kernels::spmm(prop, kernels::spmm(prop, dlogits));
  out.grad = Matrix(plan.n_injected, ag.features.cols());
  for (std::size_t i = 0; i < plan.n_injected; ++i) {
    auto dst = out.grad.row(i);
    auto bi = back.row(n + i);
    for (std::size_t d = 0; d < dst.size(); ++d) {
      double s = 0.0;
      for (std::size_t c = 0; c < weights.cols(); ++c) s += bi[c] * weights(d, c);
      dst[d] = s;
    }
    if (alpha != 0.0) {
      auto g = cosine_sim_grad(ag.features.row(n + i), ag.features.row(plan.anchors[i]));
      for (std::size_t d = 0; d < dst.size(); ++d) dst[d] -= alpha * g[d];
    }
  }
  return out;
}

// Nodes within `hops` of `source`, restricted to `allowed` (sorted), in BFS order.
std::vector<node_t> nodes_within(const Topology& t, node_t source, std::size_t hops, const std::vector<node_t>& allowed) {
  std::vector<node_t> order{source};
  std::vector<std::size_t> dist{0};
  std::vector<node_t> seen{source};
  for (std::size_t head = 0; head < order.size(); ++head) {
    if (dist[head] == hops) continue;
    for (node_t v : t.neighbors(order[head])) {
      if (!std::binary_search(allowed.begin(), allowed.end(), v)) continue;
      if (std::find(seen.begin(), seen.end(), v) != seen.end()) continue;
      seen.push_back(v);
      order.push_back(v);
      dist.push_back(dist[head] + 1);
    }
  }
  return order;
}

}  // namespace

std::vector<int> attack_labels(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg) {
  if (cfg.label_mode == LabelMode::GroundTruth) return g.labels();
  std::vector<node_t> all(g.n_nodes());
  for (node_t u = 0; u < g.n_nodes(); ++u) all[u] = u;
  return predict(attack_view(model, cfg.epsilon), g, all);
}

std::vector<node_t> anchor_candidates(const AttributedGraph& g, const SampledNeighborhood& nb, node_t target) {
  if (nb.depth() < 1) throw ValidationError("anchor_candidates: neighborhood has no sampled layer");
  std::vector<node_t> out{target};
  for (node_t v : g.topology().neighbors(target))
    if (nb.position(1, v) >= 0) out.push_back(v);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> influence_norms(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg) {
  const SurrogateModel view = attack_view(model, cfg.epsilon);
  const auto labels = attack_labels(g, model, cfg);
  const CsrMatrix prop = propagation_matrix(view, g.topology(), g.features());
  const Matrix logits = kernels::spmm(prop, kernels::spmm(prop, kernels::gemm(g.features(), view.weights[0])));
  Matrix dlogits(logits.rows(), logits.cols());
  for (node_t t : g.targets()) {
    auto ce = softmax_cross_entropy(logits.row(t), labels[t]);
    std::copy(ce.grad.begin(), ce.grad.end(), dlogits.row(t).begin());
  }
  const Matrix dx = kernels::gemm_nt(kernels::spmm(prop, kernels::spmm(prop, dlogits)), view.weights[0]);
  std::vector<double> norms(g.n_nodes());
  for (node_t u = 0; u < g.n_nodes(); ++u) {
    double s = 0.0;
    for (double v : dx.row(u)) s += v * v;
    norms[u] = std::sqrt(s);
  }
  return norms;
}

namespace {

node_t best_by_influence(std::span<const node_t> candidates, const std::vector<double>& norms) {
  if (candidates.empty()) throw ValidationError("select_anchor: empty candidate set");
  node_t best = candidates.front();
  for (node_t c : candidates) {
    if (norms[c] > norms[best] || (norms[c] == norms[best] && c < best)) best = c;
  }
  return best;
}

}  // namespace

node_t select_anchor(const AttributedGraph& g, const SampledNeighborhood& nb, const SurrogateModel& model,
                     node_t target, AnchorRule rule, const AttackConfig& cfg) {
  if (rule == AnchorRule::TargetSelf) return target;
  auto candidates = anchor_candidates(g, nb, target);
  return best_by_influence(candidates, influence_norms(g, model, cfg));
}

double attack_loss(const AttributedGraph& base, const AttackedGraph& attacked, const SurrogateModel& model,
                   const AttackConfig& cfg) {
  require_linear(model);
  const auto labels = attack_labels(base, model, cfg);
  return evaluate_attack(normalize_adjacency(attacked.topology), attacked, model.weights[0], cfg.alpha, cfg.epsilon,
                         base.targets(), labels, false)
      .loss;
}

Matrix attack_gradient(const AttributedGraph& base, const AttackedGraph& attacked, const SurrogateModel& model,
                       const AttackConfig& cfg) {
  require_linear(model);
  const auto labels = attack_labels(base, model, cfg);
  return evaluate_attack(normalize_adjacency(attacked.topology), attacked, model.weights[0], cfg.alpha, cfg.epsilon,
                         base.targets(), labels, true)
      .grad;
}

namespace {

AttackResult optimize_injection(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg,
                                 std::size_t edges_per_node) {
  cfg.validate();
  require_linear(model);
  model.validate(g.n_features(), g.n_classes());
  if (g.targets().empty()) throw ValidationError("attack: empty target set");

  const auto labels = attack_labels(g, model, cfg);
  const auto assignment = plan_injections(g, cfg);
  const auto nb = sample_neighborhood(g.topology(), g.targets(), cfg.depth, cfg.fanout, derive_seed(cfg.seed, {1}));

  std::vector<double> norms;
  if (cfg.anchor_rule == AnchorRule::BestGradient || edges_per_node > 1) norms = influence_norms(g, model, cfg);

  InjectionPlan plan;
  plan.n_injected = assignment.n_injected;
  plan.assigned_target = assignment.target_of;
  plan.features = Matrix(plan.n_injected, g.n_features());
  std::vector<std::size_t> source_row(plan.n_injected);
  for (std::size_t i = 0; i < plan.n_injected; ++i) {
    const node_t target = assignment.target_of[i];
    source_row[i] = static_cast<std::size_t>(nb.position(0, target));
    const node_t primary = cfg.anchor_rule == AnchorRule::TargetSelf
                               ? target
                               : best_by_influence(anchor_candidates(g, nb, target), norms);
    plan.anchors.push_back(primary);
  }
  if (edges_per_node > 1) {
    plan.extra_anchors.resize(plan.n_injected);
    for (std::size_t i = 0; i < plan.n_injected; ++i) {
      auto pool = nodes_within(g.topology(), assignment.target_of[i], cfg.depth, nb.layers.back());
      std::erase(pool, plan.anchors[i]);
      std::sort(pool.begin(), pool.end(), [&](node_t a, node_t b) {
        return norms[a] != norms[b] ? norms[a] > norms[b] : a < b;
      });
      pool.resize(std::min(pool.size(), edges_per_node - 1));
      plan.extra_anchors[i] = std::move(pool);
    }
  }

  AttackedGraph ag = compose(g, std::move(plan));
  const NormalizedAdjacency adj = normalize_adjacency(ag.topology);
  const std::size_t n = g.n_nodes();
  const std::size_t n_inj = ag.plan.n_injected;

  ReverseConvGenerator gen = init_generator(cfg.depth, g.n_features(), derive_seed(cfg.seed, {2}));
  AttackTrace trace;
  for (const auto& z : nb.zero_rows) trace.zero_rows += z.size();
  Matrix best_features;
  trace.best_loss = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Matrix x0 = gen.synthesize(nb, g);
    for (std::size_t i = 0; i < n_inj; ++i) {
      auto src = x0.row(source_row[i]);
      std::copy(src.begin(), src.end(), ag.features.row(n + i).begin());
    }
    const bool update = cfg.step_size > 0.0 && it + 1 < cfg.iterations;
    LossParts parts = evaluate_attack(adj, ag, model.weights[0], cfg.alpha, cfg.epsilon, g.targets(), labels, update);
    if (!std::isfinite(parts.loss)) {
      throw AttackDivergence("attack loss became non-finite at iteration " + std::to_string(it), trace);
    }
    trace.loss.push_back(parts.loss);
    if (parts.loss < trace.best_loss) {
      trace.best_loss = parts.loss;
      trace.best_iteration = it;
      best_features = Matrix(n_inj, g.n_features());
      for (std::size_t i = 0; i < n_inj; ++i) {
        auto src = ag.features.row(n + i);
        std::copy(src.begin(), src.end(), best_features.row(i).begin());
      }
    }
    if (!update) continue;
    Matrix upstream(x0.rows(), x0.cols());
    for (std::size_t i = 0; i < n_inj; ++i) {
      auto dst = upstream.row(source_row[i]);
      auto gi = parts.grad.row(i);
      for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += gi[d];
    }
    gen.apply_update(gen.gradient(upstream), cfg.step_size);
  }

  for (std::size_t i = 0; i < n_inj; ++i) {
    auto src = best_features.row(i);
    std::copy(src.begin(), src.end(), ag.features.row(n + i).begin());
  }
  ag.plan.features = std::move(best_features);
  return {std::move(ag), std::move(trace)};
}

}  // namespace

AttackResult run_segia(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg) {
  return optimize_injection(g, model, cfg, 1);
}

AttackResult run_baseline_multiedge(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg,
                                    std::size_t edges_per_node) {
  if (edges_per_node < 1) throw ValidationError("multi-edge baseline: edges_per_node must be >= 1");
  AttackConfig plain = cfg;
  plain.alpha = 0.0;
  return optimize_injection(g, model, plain, edges_per_node);
}

AttackedGraph run_baseline_random(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg) {
  cfg.validate();
  model.validate(g.n_features(), g.n_classes());
  const auto assignment = plan_injections(g, cfg);
  InjectionPlan plan;
  plan.n_injected = assignment.n_injected;
  plan.assigned_target = assignment.target_of;
  plan.anchors = assignment.target_of;
  plan.features = Matrix(plan.n_injected, g.n_features());
  std::mt19937_64 rng(derive_seed(cfg.seed, {3}));
  const auto& range = g.feature_range();
  for (std::size_t i = 0; i < plan.n_injected; ++i) {
    for (std::size_t d = 0; d < g.n_features(); ++d) {
      std::uniform_real_distribution<double> dist(range[d].min, range[d].max);
      plan.features(i, d) = std::clamp(dist(rng), range[d].min, range[d].max);
    }
  }
  return compose(g, std::move(plan));
}

nlohmann::json to_json(const InjectionPlan& plan) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < plan.n_injected; ++i) {
    auto row = plan.features.row(i);
    features.push_back(std::vector<double>(row.begin(), row.end()));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (auto [i, a] : plan.edges()) edges.push_back({i, a});
  return {{"n_injected", plan.n_injected},
          {"injected_features", features},
          {"assigned_target", plan.assigned_target},
          {"anchor_map", plan.anchors},
          {"extra_anchors", plan.extra_anchors},
          {"edges", edges},
          {"edge_count", plan.edge_count()}};
}

InjectionPlan plan_from_json(const nlohmann::json& j) {
  try {
    InjectionPlan plan;
    plan.n_injected = j.at("n_injected").get<std::size_t>();
    plan.assigned_target = j.at("assigned_target").get<std::vector<node_t>>();
    plan.anchors = j.at("anchor_map").get<std::vector<node_t>>();
    if (j.contains("extra_anchors")) plan.extra_anchors = j.at("extra_anchors").get<std::vector<std::vector<node_t>>>();
    const auto rows = j.at("injected_features").get<std::vector<std::vector<double>>>();
    if (rows.size() != plan.n_injected) throw DimensionError("plan file: feature rows != n_injected");
    plan.features = rows.empty() ? Matrix() : Matrix::from_rows(rows);
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("plan file: ") + e.what());
  }
}

}  // namespace segia
