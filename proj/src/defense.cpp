#include "segia/defense.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "segia/error.hpp"
#include "segia/seed.hpp"

namespace segia {

std::optional<double> node_homophily(const Topology& topology, const Matrix& features, node_t u) {
  if (u >= topology.n_nodes()) throw ValidationError("node_homophily: node " + std::to_string(u) + " out of range");
  const std::size_t du = topology.degree(u);
  if (du == 0) return std::nullopt;
  std::vector<double> r(features.cols(), 0.0);
  for (node_t j : topology.neighbors(u)) {
    const double w = 1.0 / std::sqrt(static_cast<double>(topology.degree(j)) * static_cast<double>(du));
    auto xj = features.row(j);
    for (std::size_t d = 0; d < r.size(); ++d) r[d] += w * xj[d];
  }
  return cosine_sim(r, features.row(u));
}

namespace {

std::uint64_t fnv(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

HomophilyProfile homophily_profile(const Topology& topology, const Matrix& features) {
  if (features.rows() != topology.n_nodes()) throw DimensionError("homophily_profile: feature rows != node count");
  HomophilyProfile p;
  for (node_t u = 0; u < topology.n_nodes(); ++u) {
    if (auto h = node_homophily(topology, features, u)) {
      p.scores.push_back(*h);
      p.scored.push_back(u);
    } else {
      p.isolated.push_back(u);
    }
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint64_t n = topology.n_nodes();
  h = fnv(h, &n, sizeof n);
  for (const Edge& e : topology.edges()) h = fnv(h, &e, sizeof e);
  h = fnv(h, features.values().data(), features.values().size() * sizeof(double));
  p.fingerprint = h;
  return p;
}

std::string_view to_string(DistanceMetric m) {
  return m == DistanceMetric::Wasserstein1 ? "wasserstein1" : "total_variation";
}

DistanceMetric parse_distance_metric(std::string_view s) {
  if (s == "wasserstein1") return DistanceMetric::Wasserstein1;
  if (s == "total_variation") return DistanceMetric::TotalVariation;
  throw ValidationError("unknown distance metric '" + std::string(s) + "'");
}

double homophily_distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric) {
  if (a.empty() || b.empty()) throw ValidationError("homophily_distance: empty profile");
  if (metric == DistanceMetric::Wasserstein1) {
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const std::size_t size = std::max(sa.size(), sb.size());
    auto quantile = [size](const std::vector<double>& s, std::size_t i) {
      const auto idx = static_cast<std::size_t>((static_cast<double>(i) + 0.5) / static_cast<double>(size) *
                                                static_cast<double>(s.size()));
      return s[std::min(idx, s.size() - 1)];
    };
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) total += std::abs(quantile(sa, i) - quantile(sb, i));
    return total / static_cast<double>(size);
  }
  constexpr std::size_t bins = 50;
  auto histogram = [](std::span<const double> v) {
    std::array<double, bins> h{};
    for (double x : v) {
      const double t = (std::clamp(x, -1.0, 1.0) + 1.0) / 2.0 * bins;
      h[std::min(static_cast<std::size_t>(t), bins - 1)] += 1.0 / static_cast<double>(v.size());
    }
    return h;
  };
  const auto ha = histogram(a), hb = histogram(b);
  double l1 = 0.0;
  for (std::size_t i = 0; i < bins; ++i) l1 += std::abs(ha[i] - hb[i]);
  return 0.5 * l1;
}

double homophily_distance(const HomophilyProfile& a, const HomophilyProfile& b, DistanceMetric metric) {
  return homophily_distance(a.scores, b.scores, metric);
}

DefendedGraph prune_defense(const Topology& topology, const Matrix& features, double epsilon,
                            std::size_t n_original) {
  if (!(epsilon >= -1.0 && epsilon <= 1.0)) throw ValidationError("prune_defense: epsilon must lie in [-1, 1]");
  if (features.rows() != topology.n_nodes()) throw DimensionError("prune_defense: feature rows != node count");
  DefendedGraph out;
  out.report.epsilon = epsilon;
  std::vector<Edge> kept;
  kept.reserve(topology.n_edges());
  for (const Edge& e : topology.edges()) {
    const bool injected = e.v >= n_original;
    if (injected) ++out.report.injected_edges;
    if (cosine_sim(features.row(e.u), features.row(e.v)) < epsilon) {
      out.report.pruned_edges.push_back(e);
    } else {
      kept.push_back(e);
      if (injected) ++out.report.surviving_injected_edges;
    }
  }
  out.topology = Topology(topology.n_nodes(), kept);
  return out;
}

DefendedGraph prune_defense(const AttributedGraph& g, double epsilon) {
  return prune_defense(g.topology(), g.features(), epsilon, g.n_nodes());
}

DefendedGraph prune_defense(const AttackedGraph& g, double epsilon) {
  return prune_defense(g.topology, g.features, epsilon, g.n_original);
}

double misclassification_rate(const SurrogateModel& model, const Topology& topology, const Matrix& features,
                              std::span<const node_t> targets, std::span<const int> labels) {
  if (targets.empty()) throw ValidationError("misclassification_rate: empty target set");
  const auto pred = predict(model, topology, features, targets);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= labels.size()) throw ValidationError("misclassification_rate: target without a label");
    if (pred[i] != labels[targets[i]]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(targets.size());
}

double defended_attack_loss(const AttributedGraph& base, const AttackedGraph& attacked, const Topology& defended,
                            const SurrogateModel& model, const AttackConfig& cfg) {
  if (!model.is_linear()) throw PreconditionError("defended_attack_loss needs a linear surrogate");
  SurrogateModel sgc = model;
  sgc.variant = Variant::SGC;
  const auto labels = attack_labels(base, model, cfg);
  const double target_loss = loss_on_targets(sgc, defended, attacked.features, base.targets(), labels);
  double similarity = 0.0;
  for (std::size_t i = 0; i < attacked.plan.n_injected; ++i) {
    similarity += cosine_sim(attacked.features.row(attacked.n_original + i),
                             attacked.features.row(attacked.plan.anchors[i]));
  }
  return -target_loss - cfg.alpha * similarity;
}

Theorem1Report theorem1_check(const AttributedGraph& g, const SurrogateModel& model, const AttackConfig& cfg,
                              const Theorem1Options& opts) {
  if (!model.is_linear()) throw PreconditionError("theorem1: the surrogate must be SGC or PrSGC");
  if (!is_connected(g.topology())) throw PreconditionError("theorem1: graph is not connected");
  for (node_t u = 0; u < g.n_nodes(); ++u) {
    if (g.topology().degree(u) == 0) throw PreconditionError("theorem1: node " + std::to_string(u) + " is isolated");
  }
  std::vector<char> seen(g.n_classes(), 0);
  for (node_t u : g.labeled()) seen[static_cast<std::size_t>(g.labels()[u])] = 1;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) throw PreconditionError("theorem1: class " + std::to_string(c) + " has no labeled node");
  }
  if (opts.n_seeds < 1) throw ValidationError("theorem1: need at least one seed");
  if (opts.edges_per_node < 1) throw ValidationError("theorem1: edges_per_node must be >= 1");
  if (!(opts.comparator_epsilon >= -1.0 && opts.comparator_epsilon <= 1.0)) {
    throw ValidationError("theorem1: comparator epsilon must lie in [-1, 1]");
  }

  const HomophilyProfile clean = homophily_profile(g.topology(), g.features());
  Theorem1Report report;
  report.seeds.resize(opts.n_seeds);
  std::vector<std::string> errors(opts.n_seeds);

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t s = 0; s < static_cast<std::int64_t>(opts.n_seeds); ++s) {
    try {
      AttackConfig run = cfg;
      run.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(s)});
      const AttackResult segia = run_segia(g, model, run);
      AttackConfig comparator = run;
      comparator.epsilon = opts.comparator_epsilon;
      const AttackResult gia = run_baseline_multiedge(g, model, comparator, opts.edges_per_node);

      Theorem1Seed& row = report.seeds[static_cast<std::size_t>(s)];
      row.seed = run.seed;
      const auto hs = homophily_profile(segia.graph.topology, segia.graph.features);
      const auto hg = homophily_profile(gia.graph.topology, gia.graph.features);
      row.dis_segia_w1 = homophily_distance(clean, hs, DistanceMetric::Wasserstein1);
      row.dis_gia_w1 = homophily_distance(clean, hg, DistanceMetric::Wasserstein1);
      row.dis_segia_tv = homophily_distance(clean, hs, DistanceMetric::TotalVariation);
      row.dis_gia_tv = homophily_distance(clean, hg, DistanceMetric::TotalVariation);

      const auto ds = prune_defense(segia.graph, opts.defense_epsilon);
      const auto dg = prune_defense(gia.graph, opts.defense_epsilon);
      row.defended_loss_segia = defended_attack_loss(g, segia.graph, ds.topology, model, cfg);
      row.defended_loss_gia = defended_attack_loss(g, gia.graph, dg.topology, model, cfg);
      row.surviving_segia = ds.report.surviving_injected_edges;
      row.injected_edges_segia = ds.report.injected_edges;
      row.surviving_gia = dg.report.surviving_injected_edges;
      row.injected_edges_gia = dg.report.injected_edges;
      row.homophily_holds = row.dis_segia_w1 <= row.dis_gia_w1;
      row.loss_holds = row.defended_loss_segia <= row.defended_loss_gia;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(s)] = e.what();
    }
  }
  for (std::size_t s = 0; s < errors.size(); ++s) {
    if (!errors[s].empty()) throw Error("theorem1: seed " + std::to_string(s) + ": " + errors[s]);
  }

  std::size_t hold_w1 = 0, hold_tv = 0, hold_loss = 0;
  for (const auto& row : report.seeds) {
    hold_w1 += row.homophily_holds;
    hold_tv += row.dis_segia_tv <= row.dis_gia_tv;
    hold_loss += row.loss_holds;
  }
  const auto n = static_cast<double>(report.seeds.size());
  report.homophily_rate = static_cast<double>(hold_w1) / n;
  report.homophily_rate_tv = static_cast<double>(hold_tv) / n;
  report.loss_rate = static_cast<double>(hold_loss) / n;
  return report;
}

nlohmann::json to_json(const DefenseReport& r) {
  nlohmann::json pruned = nlohmann::json::array();
  for (const Edge& e : r.pruned_edges) pruned.push_back({e.u, e.v});
  return {{"epsilon", r.epsilon},
          {"pruned_edges", pruned},
          {"pruned_count", r.pruned_edges.size()},
          {"injected_edges", r.injected_edges},
          {"surviving_injected_edges", r.surviving_injected_edges},
          {"logits_source", r.logits_source}};
}

nlohmann::json to_json(const Theorem1Report& r) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : r.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"dis_segia_wasserstein1", s.dis_segia_w1},
                     {"dis_gia_wasserstein1", s.dis_gia_w1},
                     {"dis_segia_total_variation", s.dis_segia_tv},
                     {"dis_gia_total_variation", s.dis_gia_tv},
                     {"defended_loss_segia", s.defended_loss_segia},
                     {"defended_loss_gia", s.defended_loss_gia},
                     {"surviving_injected_segia", s.surviving_segia},
                     {"injected_edges_segia", s.injected_edges_segia},
                     {"surviving_injected_gia", s.surviving_gia},
                     {"injected_edges_gia", s.injected_edges_gia},
                     {"homophily_holds", s.homophily_holds},
                     {"loss_holds", s.loss_holds}});
  }
  return {{"seeds", seeds},
          {"homophily_rate", r.homophily_rate},
          {"homophily_rate_total_variation", r.homophily_rate_tv},
          {"loss_rate", r.loss_rate}};
}

}  // namespace segia
