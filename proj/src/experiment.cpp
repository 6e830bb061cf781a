#include "segia/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "segia/error.hpp"
#include "segia/seed.hpp"

namespace segia {

namespace fs = std::filesystem;

std::string_view to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::Segia: return "segia";
    case AttackMethod::Random: return "random";
    case AttackMethod::MultiEdge: return "multiedge";
  }
  return "?";
}

AttackMethod parse_attack_method(std::string_view s) {
  if (s == "segia") return AttackMethod::Segia;
  if (s == "random") return AttackMethod::Random;
  if (s == "multiedge") return AttackMethod::MultiEdge;
  throw ValidationError("unknown attack method '" + std::string(s) + "'");
}

void ExperimentConfig::validate(bool sweep_mode) const {
  if (jobs < 1) throw ValidationError("config: jobs must be >= 1");
  if (!graph.dir.empty() && !fs::is_directory(graph.dir)) {
    throw ValidationError("config: graph directory " + graph.dir.string() + " does not exist");
  }
  for (const ModelSpec* m : {&surrogate, &victim}) {
    if (m->checkpoint && !fs::exists(*m->checkpoint)) {
      throw ValidationError("config: checkpoint " + m->checkpoint->string() + " does not exist");
    }
    if (!(m->epsilon >= -1.0 && m->epsilon <= 1.0)) throw ValidationError("config: model epsilon must lie in [-1, 1]");
    if (!(m->train.lr > 0.0)) throw ValidationError("config: learning rate must be > 0");
  }
  if (plan && !fs::exists(*plan)) throw ValidationError("config: plan file " + plan->string() + " does not exist");
  attack.validate();
  if (edges_per_node < 1) throw ValidationError("config: edges_per_node must be >= 1");
  if (runs < 1) throw ValidationError("config: runs must be >= 1");
  if (!(defense_epsilon >= -1.0 && defense_epsilon <= 1.0)) {
    throw ValidationError("config: defense epsilon must lie in [-1, 1]");
  }
  if (sweep_mode) {
    if (sweep.alpha.empty() || sweep.depth.empty() || sweep.perturbation_rate.empty()) {
      throw ValidationError("config: sweep needs nonempty alpha, K and perturbation_rate lists");
    }
    if (sweep.seeds < 1) throw ValidationError("config: sweep seeds must be >= 1");
  }
}

namespace {

nlohmann::json model_spec_json(const ModelSpec& m) {
  nlohmann::json j = {{"variant", to_string(m.variant)},
                      {"epsilon", m.epsilon},
                      {"lr", m.train.lr},
                      {"epochs", m.train.epochs}};
  if (m.checkpoint) j["checkpoint"] = m.checkpoint->string();
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j, ModelSpec m) {
  if (j.contains("variant")) m.variant = parse_variant(j.at("variant").get<std::string>());
  if (j.contains("epsilon")) m.epsilon = j.at("epsilon").get<double>();
  if (j.contains("lr")) m.train.lr = j.at("lr").get<double>();
  if (j.contains("epochs")) m.train.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("checkpoint")) m.checkpoint = j.at("checkpoint").get<std::string>();
  return m;
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json graph;
  if (cfg.graph.dir.empty()) {
    const auto& s = cfg.graph.synthetic;
    graph["synthetic"] = {{"n", s.n},
                          {"c", s.c},
                          {"d", s.d},
                          {"p_in", s.p_in},
                          {"p_out", s.p_out},
                          {"class_sep", s.class_sep},
                          {"seed", s.seed},
                          {"labeled_fraction", s.labeled_fraction},
                          {"target_fraction", s.target_fraction}};
  } else {
    graph["dir"] = cfg.graph.dir.string();
  }
  if (cfg.graph.n_classes) graph["n_classes"] = *cfg.graph.n_classes;

  nlohmann::json attack = to_json(cfg.attack);
  attack.erase("seed");
  attack["method"] = to_string(cfg.method);
  attack["edges_per_node"] = cfg.edges_per_node;
  attack["runs"] = cfg.runs;
  if (cfg.plan) attack["plan"] = cfg.plan->string();

  return {{"seed", cfg.seed},
          {"out", cfg.out_dir.string()},
          {"jobs", cfg.jobs},
          {"graph", graph},
          {"surrogate", model_spec_json(cfg.surrogate)},
          {"victim", model_spec_json(cfg.victim)},
          {"attack", attack},
          {"defense", {{"epsilon", cfg.defense_epsilon}}},
          {"sweep",
           {{"alpha", cfg.sweep.alpha},
            {"K", cfg.sweep.depth},
            {"perturbation_rate", cfg.sweep.perturbation_rate},
            {"seeds", cfg.sweep.seeds}}},
          {"theorem1",
           {{"n_seeds", cfg.theorem1.n_seeds},
            {"edges_per_node", cfg.theorem1.edges_per_node},
            {"defense_epsilon", cfg.theorem1.defense_epsilon},
            {"comparator_epsilon", cfg.theorem1.comparator_epsilon}}}};
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig cfg) {
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  try {
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      if (g.contains("dir")) cfg.graph.dir = g.at("dir").get<std::string>();
      if (g.contains("n_classes")) cfg.graph.n_classes = g.at("n_classes").get<std::size_t>();
      if (g.contains("synthetic")) {
        const auto& s = g.at("synthetic");
        auto& spec = cfg.graph.synthetic;
        if (s.contains("n")) spec.n = s.at("n").get<std::size_t>();
        if (s.contains("c")) spec.c = s.at("c").get<std::size_t>();
        if (s.contains("d")) spec.d = s.at("d").get<std::size_t>();
        if (s.contains("p_in")) spec.p_in = s.at("p_in").get<double>();
        if (s.contains("p_out")) spec.p_out = s.at("p_out").get<double>();
        if (s.contains("class_sep")) spec.class_sep = s.at("class_sep").get<double>();
        if (s.contains("seed")) spec.seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("labeled_fraction")) spec.labeled_fraction = s.at("labeled_fraction").get<double>();
        if (s.contains("target_fraction")) spec.target_fraction = s.at("target_fraction").get<double>();
      }
    }
    if (j.contains("surrogate")) cfg.surrogate = model_spec_from_json(j.at("surrogate"), cfg.surrogate);
    if (j.contains("victim")) cfg.victim = model_spec_from_json(j.at("victim"), cfg.victim);
    if (j.contains("attack")) {
      const auto& a = j.at("attack");
      cfg.attack = attack_config_from_json(a, cfg.attack);
      if (a.contains("method")) cfg.method = parse_attack_method(a.at("method").get<std::string>());
      if (a.contains("edges_per_node")) cfg.edges_per_node = a.at("edges_per_node").get<std::size_t>();
      if (a.contains("runs")) cfg.runs = a.at("runs").get<std::size_t>();
      if (a.contains("plan")) cfg.plan = a.at("plan").get<std::string>();
    }
    if (j.contains("defense") && j.at("defense").contains("epsilon")) {
      cfg.defense_epsilon = j.at("defense").at("epsilon").get<double>();
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      if (s.contains("alpha")) cfg.sweep.alpha = s.at("alpha").get<std::vector<double>>();
      if (s.contains("K")) cfg.sweep.depth = s.at("K").get<std::vector<std::size_t>>();
      if (s.contains("perturbation_rate")) {
        cfg.sweep.perturbation_rate = s.at("perturbation_rate").get<std::vector<double>>();
      }
      if (s.contains("seeds")) cfg.sweep.seeds = s.at("seeds").get<std::size_t>();
    }
    if (j.contains("theorem1")) {
      const auto& t = j.at("theorem1");
      if (t.contains("n_seeds")) cfg.theorem1.n_seeds = t.at("n_seeds").get<std::size_t>();
      if (t.contains("edges_per_node")) cfg.theorem1.edges_per_node = t.at("edges_per_node").get<std::size_t>();
      if (t.contains("defense_epsilon")) cfg.theorem1.defense_epsilon = t.at("defense_epsilon").get<double>();
      if (t.contains("comparator_epsilon")) {
        cfg.theorem1.comparator_epsilon = t.at("comparator_epsilon").get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::uint64_t surrogate_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, {10}); }
std::uint64_t victim_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, {11}); }
std::uint64_t attack_seed(const ExperimentConfig& cfg, std::uint64_t index) {
  return derive_seed(cfg.seed, {20, index});
}

AttributedGraph load_source(const GraphSource& src) {
  if (src.dir.empty()) return generate_synthetic(src.synthetic);
  return load_graph(GraphFiles::in(src.dir), src.n_classes);
}

SurrogateModel load_checkpoint(const fs::path& path) {
  const auto j = read_json(path);
  return model_from_json(j.contains("model") ? j.at("model") : j);
}

void save_checkpoint(const SurrogateModel& model, const ExperimentConfig& cfg, const fs::path& path) {
  write_json(path, {{"version", kVersion}, {"config", to_json(cfg)}, {"model", to_json(model)}});
}

SurrogateModel obtain_model(const ModelSpec& spec, const AttributedGraph& g, std::uint64_t seed) {
  if (spec.checkpoint) {
    SurrogateModel m = load_checkpoint(*spec.checkpoint);
    m.validate(g.n_features(), g.n_classes());
    if (m.trained_on != g.fingerprint()) {
      std::cerr << "warning: checkpoint " << spec.checkpoint->string() << " was trained on a different graph\n";
    }
    return m;
  }
  TrainOptions opts = spec.train;
  opts.seed = seed;
  return train(SurrogateModel::initial(spec.variant, g.n_features(), g.n_classes(), seed,
                                       spec.variant == Variant::PrSGC ? spec.epsilon : -1.0),
               g, opts)
      .model;
}

namespace {

double surrogate_target_loss(const SurrogateModel& surrogate, const Topology& topology, const Matrix& features,
                             const AttributedGraph& base, const AttackConfig& cfg) {
  SurrogateModel view = surrogate;
  view.variant = Variant::PrSGC;
  view.epsilon = cfg.epsilon;
  return loss_on_targets(view, topology, features, base.targets(), attack_labels(base, surrogate, cfg));
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json envelope(const ExperimentConfig& cfg) { return {{"version", kVersion}, {"config", to_json(cfg)}}; }

void require_linear_surrogate(const SurrogateModel& m) {
  if (!m.is_linear()) throw PreconditionError("the attack needs an SGC or PrSGC surrogate");
}

AttackedGraph attacked_from_plan(const AttributedGraph& base, const fs::path& path) {
  const auto j = read_json(path);
  InjectionPlan plan = plan_from_json(j.contains("plan") ? j.at("plan") : j);
  plan.validate(base, false);
  return compose(base, std::move(plan));
}

}  // namespace

AttackRun run_attack(const AttributedGraph& g, const SurrogateModel& surrogate, const SurrogateModel& victim,
                     const AttackConfig& cfg, AttackMethod method, std::size_t edges_per_node,
                     double defense_epsilon) {
  AttackRun run;
  RunMetrics& m = run.metrics;
  m.method = method;
  m.seed = cfg.seed;
  switch (method) {
    case AttackMethod::Segia: {
      auto r = run_segia(g, surrogate, cfg);
      run.graph = std::move(r.graph);
      m.trace = std::move(r.trace);
      break;
    }
    case AttackMethod::MultiEdge: {
      auto r = run_baseline_multiedge(g, surrogate, cfg, edges_per_node);
      run.graph = std::move(r.graph);
      m.trace = std::move(r.trace);
      break;
    }
    case AttackMethod::Random:
      run.graph = run_baseline_random(g, surrogate, cfg);
      break;
  }
  const AttackedGraph& ag = run.graph;
  m.node_budget = ag.plan.n_injected;
  m.edge_budget = ag.plan.edge_count();

  const auto& targets = g.targets();
  const auto& labels = g.labels();
  m.clean_rate = misclassification_rate(victim, g.topology(), g.features(), targets, labels);
  m.attacked_rate = misclassification_rate(victim, ag.topology, ag.features, targets, labels);
  const auto clean_defended = prune_defense(g, defense_epsilon);
  const auto defended = prune_defense(ag, defense_epsilon);
  m.defended_clean_rate = misclassification_rate(victim, clean_defended.topology, g.features(), targets, labels);
  m.defended_rate = misclassification_rate(victim, defended.topology, ag.features, targets, labels);
  m.surviving_injected_edges = defended.report.surviving_injected_edges;

  m.surrogate_loss_clean = surrogate_target_loss(surrogate, g.topology(), g.features(), g, cfg);
  m.surrogate_loss_attacked = surrogate_target_loss(surrogate, ag.topology, ag.features, g, cfg);

  const auto h_clean = homophily_profile(g.topology(), g.features());
  const auto h_attacked = homophily_profile(ag.topology, ag.features);
  m.homophily_w1 = homophily_distance(h_clean, h_attacked, DistanceMetric::Wasserstein1);
  m.homophily_tv = homophily_distance(h_clean, h_attacked, DistanceMetric::TotalVariation);

  double sim = 0.0;
  for (std::size_t i = 0; i < ag.plan.n_injected; ++i) {
    sim += cosine_sim(ag.features.row(ag.n_original + i), ag.features.row(ag.plan.anchors[i]));
  }
  m.mean_anchor_similarity = ag.plan.n_injected ? sim / static_cast<double>(ag.plan.n_injected) : 0.0;
  return run;
}

double non_increasing_fraction(const AttackTrace& t) {
  if (t.loss.size() < 2) return 1.0;
  std::size_t down = 0;
  for (std::size_t i = 1; i < t.loss.size(); ++i) down += t.loss[i] <= t.loss[i - 1];
  return static_cast<double>(down) / static_cast<double>(t.loss.size() - 1);
}

nlohmann::json to_json(const RunMetrics& m) {
  nlohmann::json j = {{"method", to_string(m.method)},
                      {"seed", m.seed},
                      {"node_budget", m.node_budget},
                      {"edge_budget", m.edge_budget},
                      {"clean_misclassification", m.clean_rate},
                      {"attacked_misclassification", m.attacked_rate},
                      {"defended_clean_misclassification", m.defended_clean_rate},
                      {"defended_misclassification", m.defended_rate},
                      {"surrogate_target_loss_clean", m.surrogate_loss_clean},
                      {"surrogate_target_loss_attacked", m.surrogate_loss_attacked},
                      {"homophily_distance", {{"wasserstein1", m.homophily_w1}, {"total_variation", m.homophily_tv}}},
                      {"surviving_injected_edges", m.surviving_injected_edges},
                      {"mean_anchor_similarity", m.mean_anchor_similarity}};
  if (m.trace) {
    j["trace"] = {{"loss", m.trace->loss},
                  {"best_iteration", m.trace->best_iteration},
                  {"best_loss", m.trace->best_loss},
                  {"zero_rows", m.trace->zero_rows},
                  {"non_increasing_fraction", non_increasing_fraction(*m.trace)}};
  }
  return j;
}

CommandResult cmd_gen_synthetic(const ExperimentConfig& cfg) {
  cfg.validate();
  const AttributedGraph g = generate_synthetic(cfg.graph.synthetic);
  const fs::path dir = cfg.out_dir / "graph";
  save_graph(g, GraphFiles::in(dir));
  nlohmann::json info = envelope(cfg);
  info["n_nodes"] = g.n_nodes();
  info["n_edges"] = g.n_edges();
  info["n_classes"] = g.n_classes();
  info["average_degree"] = average_degree(g);
  info["labeled"] = g.labeled().size();
  info["targets"] = g.targets().size();
  info["fingerprint"] = g.fingerprint();
  write_json(dir / "info.json", info);
  return {dir, true};
}

CommandResult cmd_train(const ExperimentConfig& cfg, const std::string& role) {
  cfg.validate();
  if (role != "surrogate" && role != "victim") throw ValidationError("train: role must be surrogate or victim");
  const ModelSpec& spec = role == "victim" ? cfg.victim : cfg.surrogate;
  const std::uint64_t seed = role == "victim" ? victim_seed(cfg) : surrogate_seed(cfg);
  const AttributedGraph g = load_source(cfg.graph);
  TrainOptions opts = spec.train;
  opts.seed = seed;
  const TrainResult r = train(SurrogateModel::initial(spec.variant, g.n_features(), g.n_classes(), seed,
                                                      spec.variant == Variant::PrSGC ? spec.epsilon : -1.0),
                              g, opts);
  const fs::path checkpoint = cfg.out_dir / (role + ".json");
  save_checkpoint(r.model, cfg, checkpoint);
  nlohmann::json log = envelope(cfg);
  log["role"] = role;
  log["losses"] = r.losses;
  log["final_loss"] = r.final_loss;
  log["step"] = r.step;
  log["labeled_accuracy"] = 1.0 - misclassification_rate(r.model, g.topology(), g.features(), g.labeled(), g.labels());
  write_json(cfg.out_dir / (role + "_train_log.json"), log);
  return {checkpoint, true};
}

CommandResult cmd_attack(const ExperimentConfig& cfg) {
  cfg.validate();
  const AttributedGraph g = load_source(cfg.graph);
  const SurrogateModel surrogate = obtain_model(cfg.surrogate, g, surrogate_seed(cfg));
  if (cfg.method != AttackMethod::Random) require_linear_surrogate(surrogate);
  const SurrogateModel victim = obtain_model(cfg.victim, g, victim_seed(cfg));

  const std::size_t n = cfg.runs;
  std::vector<std::optional<AttackRun>> runs(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic) num_threads(cfg.jobs)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(n); ++r) {
    try {
      AttackConfig ac = cfg.attack;
      ac.seed = attack_seed(cfg, static_cast<std::uint64_t>(r));
      runs[static_cast<std::size_t>(r)] = run_attack(g, surrogate, victim, ac, cfg.method, cfg.edges_per_node,
                                                     cfg.defense_epsilon);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  }

  nlohmann::json summary = envelope(cfg);
  nlohmann::json rows = nlohmann::json::array();
  bool ok = true;
  double sums[4] = {0, 0, 0, 0};
  std::size_t done = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::string tag = std::to_string(r);
    if (!runs[r]) {
      ok = false;
      rows.push_back({{"run", r}, {"error", errors[r]}});
      std::cerr << "attack run " << r << " failed: " << errors[r] << '\n';
      continue;
    }
    const AttackRun& run = *runs[r];
    if (run.metrics.trace && non_increasing_fraction(*run.metrics.trace) < 0.8) {
      std::cerr << "note: run " << r << " loss trace is non-increasing in "
                << non_increasing_fraction(*run.metrics.trace) * 100.0 << "% of steps\n";
    }
    nlohmann::json plan = envelope(cfg);
    plan["seed"] = run.metrics.seed;
    plan["plan"] = to_json(run.graph.plan);
    if (run.metrics.trace) plan["trace"] = run.metrics.trace->loss;
    write_json(cfg.out_dir / ("plan_" + tag + ".json"), plan);

    nlohmann::json report = envelope(cfg);
    report["run"] = r;
    report["metrics"] = to_json(run.metrics);
    write_json(cfg.out_dir / ("report_" + tag + ".json"), report);
    save_graph(to_attributed(g, run.graph), GraphFiles::in(cfg.out_dir / ("attacked_graph_" + tag)));

    rows.push_back({{"run", r},
                    {"seed", run.metrics.seed},
                    {"node_budget", run.metrics.node_budget},
                    {"edge_budget", run.metrics.edge_budget},
                    {"clean_misclassification", run.metrics.clean_rate},
                    {"attacked_misclassification", run.metrics.attacked_rate},
                    {"defended_misclassification", run.metrics.defended_rate}});
    sums[0] += run.metrics.clean_rate;
    sums[1] += run.metrics.attacked_rate;
    sums[2] += run.metrics.defended_clean_rate;
    sums[3] += run.metrics.defended_rate;
    ++done;
  }
  summary["runs"] = rows;
  if (done) {
    const auto d = static_cast<double>(done);
    summary["mean"] = {{"clean_misclassification", sums[0] / d},
                       {"attacked_misclassification", sums[1] / d},
                       {"defended_clean_misclassification", sums[2] / d},
                       {"defended_misclassification", sums[3] / d}};
  }
  const fs::path out = cfg.out_dir / "summary.json";
  write_json(out, summary);
  return {out, ok};
}

CommandResult cmd_defend(const ExperimentConfig& cfg) {
  cfg.validate();
  const AttributedGraph g = load_source(cfg.graph);
  nlohmann::json report = envelope(cfg);
  const fs::path dir = cfg.out_dir / "defended_graph";
  if (cfg.plan) {
    AttackedGraph ag = attacked_from_plan(g, *cfg.plan);
    DefendedGraph d = prune_defense(ag, cfg.defense_epsilon);
    d.report.logits_source = "none";
    report["defense"] = to_json(d.report);
    ag.topology = std::move(d.topology);
    save_graph(to_attributed(g, ag), GraphFiles::in(dir));
  } else {
    DefendedGraph d = prune_defense(g, cfg.defense_epsilon);
    d.report.logits_source = "none";
    report["defense"] = to_json(d.report);
    save_graph(AttributedGraph::build(d.topology, g.features(), g.labels(), g.labeled(), g.targets(), g.n_classes()),
               GraphFiles::in(dir));
  }
  const fs::path out = cfg.out_dir / "defense.json";
  write_json(out, report);
  return {out, true};
}

CommandResult cmd_evaluate(const ExperimentConfig& cfg) {
  cfg.validate();
  const AttributedGraph g = load_source(cfg.graph);
  const SurrogateModel victim = obtain_model(cfg.victim, g, victim_seed(cfg));
  nlohmann::json report = envelope(cfg);
  const auto& targets = g.targets();
  report["clean_misclassification"] =
      misclassification_rate(victim, g.topology(), g.features(), targets, g.labels());
  const auto clean_defended = prune_defense(g, cfg.defense_epsilon);
  report["defended_clean_misclassification"] =
      misclassification_rate(victim, clean_defended.topology, g.features(), targets, g.labels());
  if (cfg.plan) {
    const AttackedGraph ag = attacked_from_plan(g, *cfg.plan);
    report["attacked_misclassification"] = misclassification_rate(victim, ag.topology, ag.features, targets, g.labels());
    auto d = prune_defense(ag, cfg.defense_epsilon);
    d.report.logits_source = "victim " + std::string(to_string(victim.variant));
    report["defended_misclassification"] = misclassification_rate(victim, d.topology, ag.features, targets, g.labels());
    report["defense"] = {{"pruned_count", d.report.pruned_edges.size()},
                         {"injected_edges", d.report.injected_edges},
                         {"surviving_injected_edges", d.report.surviving_injected_edges},
                         {"logits_source", d.report.logits_source}};
    report["node_budget"] = ag.plan.n_injected;
    report["edge_budget"] = ag.plan.edge_count();
  }
  const fs::path out = cfg.out_dir / "evaluate.json";
  write_json(out, report);
  return {out, true};
}

CommandResult cmd_sweep(const ExperimentConfig& cfg) {
  cfg.validate(true);
  const AttributedGraph g = load_source(cfg.graph);
  const SurrogateModel surrogate = obtain_model(cfg.surrogate, g, surrogate_seed(cfg));
  if (cfg.method != AttackMethod::Random) require_linear_surrogate(surrogate);
  const SurrogateModel victim = obtain_model(cfg.victim, g, victim_seed(cfg));

  struct Cell {
    std::size_t ia, ik, ip, s;
  };
  std::vector<Cell> cells;
  for (std::size_t ia = 0; ia < cfg.sweep.alpha.size(); ++ia)
    for (std::size_t ik = 0; ik < cfg.sweep.depth.size(); ++ik)
      for (std::size_t ip = 0; ip < cfg.sweep.perturbation_rate.size(); ++ip)
        for (std::size_t s = 0; s < cfg.sweep.seeds; ++s) cells.push_back({ia, ik, ip, s});

  std::vector<std::optional<RunMetrics>> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::vector<double> seconds(cells.size(), 0.0);
#pragma omp parallel for schedule(dynamic) num_threads(cfg.jobs)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(cells.size()); ++i) {
    const Cell& c = cells[static_cast<std::size_t>(i)];
    const auto start = std::chrono::steady_clock::now();
    try {
      AttackConfig ac = cfg.attack;
      ac.alpha = cfg.sweep.alpha[c.ia];
      ac.depth = cfg.sweep.depth[c.ik];
      ac.perturbation_rate = cfg.sweep.perturbation_rate[c.ip];
      ac.seed = derive_seed(cfg.seed, {30, c.ia, c.ik, c.ip, c.s});
      auto run = run_attack(g, surrogate, victim, ac, cfg.method, cfg.edges_per_node, cfg.defense_epsilon);
      results[static_cast<std::size_t>(i)] = std::move(run.metrics);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
    seconds[static_cast<std::size_t>(i)] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  fs::create_directories(cfg.out_dir);
  const fs::path csv_path = cfg.out_dir / "sweep.csv";
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw Error("cannot write " + csv_path.string());
  csv << "alpha,K,perturbation_rate,seed_index,seed,status,node_budget,edge_budget,clean_misclassification,"
         "attacked_misclassification,defended_clean_misclassification,defended_misclassification,"
         "surrogate_target_loss_attacked,homophily_wasserstein1,homophily_total_variation,"
         "surviving_injected_edges,mean_anchor_similarity,best_loss\n";
  bool ok = true;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    csv << fmt_double(cfg.sweep.alpha[c.ia]) << ',' << cfg.sweep.depth[c.ik] << ','
        << fmt_double(cfg.sweep.perturbation_rate[c.ip]) << ',' << c.s << ','
        << derive_seed(cfg.seed, {30, c.ia, c.ik, c.ip, c.s}) << ',';
    if (!results[i]) {
      ok = false;
      std::string msg = errors[i];
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      csv << "error: " << msg << ",,,,,,,,,,,,\n";
      continue;
    }
    const RunMetrics& m = *results[i];
    csv << "ok," << m.node_budget << ',' << m.edge_budget << ',' << fmt_double(m.clean_rate) << ','
        << fmt_double(m.attacked_rate) << ',' << fmt_double(m.defended_clean_rate) << ','
        << fmt_double(m.defended_rate) << ',' << fmt_double(m.surrogate_loss_attacked) << ','
        << fmt_double(m.homophily_w1) << ',' << fmt_double(m.homophily_tv) << ',' << m.surviving_injected_edges
        << ',' << fmt_double(m.mean_anchor_similarity) << ','
        << (m.trace ? fmt_double(m.trace->best_loss) : std::string()) << '\n';
  }
  csv.close();

  // Timing lives outside the deterministic outputs.
  std::ofstream timing(cfg.out_dir / "sweep_timing.csv", std::ios::binary);
  timing << "alpha,K,perturbation_rate,seed_index,seconds\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    timing << fmt_double(cfg.sweep.alpha[c.ia]) << ',' << cfg.sweep.depth[c.ik] << ','
           << fmt_double(cfg.sweep.perturbation_rate[c.ip]) << ',' << c.s << ',' << seconds[i] << '\n';
  }

  // Soft check: homophily distance should not grow with alpha.
  std::size_t groups = 0, monotone = 0;
  for (std::size_t ik = 0; ik < cfg.sweep.depth.size(); ++ik) {
    for (std::size_t ip = 0; ip < cfg.sweep.perturbation_rate.size(); ++ip) {
      for (std::size_t s = 0; s < cfg.sweep.seeds; ++s) {
        std::vector<std::pair<double, double>> series;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          const Cell& c = cells[i];
          if (c.ik == ik && c.ip == ip && c.s == s && results[i]) {
            series.emplace_back(cfg.sweep.alpha[c.ia], results[i]->homophily_w1);
          }
        }
        if (series.size() < 2) continue;
        std::sort(series.begin(), series.end());
        bool mono = true;
        for (std::size_t k = 1; k < series.size(); ++k) mono = mono && series[k].second <= series[k - 1].second;
        ++groups;
        monotone += mono;
        if (!mono) {
          std::cerr << "note: homophily distance not monotone in alpha (K=" << cfg.sweep.depth[ik]
                    << ", Pr=" << cfg.sweep.perturbation_rate[ip] << ", seed index " << s << ")\n";
        }
      }
    }
  }
  nlohmann::json summary = envelope(cfg);
  summary["cells"] = cells.size();
  summary["failed_cells"] = static_cast<std::size_t>(std::count_if(results.begin(), results.end(),
                                                                   [](const auto& r) { return !r; }));
  summary["alpha_trend"] = {{"groups", groups}, {"monotone_groups", monotone}};
  summary["table"] = csv_path.filename().string();
  write_json(cfg.out_dir / "sweep.json", summary);
  return {csv_path, ok};
}

Theorem1Report run_theorem1(const ExperimentConfig& cfg) {
  const AttributedGraph g = load_source(cfg.graph);
  const SurrogateModel surrogate = obtain_model(cfg.surrogate, g, surrogate_seed(cfg));
  AttackConfig ac = cfg.attack;
  ac.seed = attack_seed(cfg, 0);
  return theorem1_check(g, surrogate, ac, cfg.theorem1);
}

CommandResult cmd_theorem1(const ExperimentConfig& cfg) {
  cfg.validate();
  const Theorem1Report report = run_theorem1(cfg);
  nlohmann::json j = envelope(cfg);
  j["theorem1"] = to_json(report);
  const fs::path out = cfg.out_dir / "theorem1.json";
  write_json(out, j);

  std::ofstream csv(cfg.out_dir / "theorem1.csv", std::ios::binary);
  if (!csv) throw Error("cannot write theorem1.csv");
  csv << "seed_index,seed,dis_segia_wasserstein1,dis_gia_wasserstein1,dis_segia_total_variation,"
         "dis_gia_total_variation,defended_loss_segia,defended_loss_gia,surviving_segia,injected_segia,"
         "surviving_gia,injected_gia,homophily_holds,loss_holds\n";
  for (std::size_t i = 0; i < report.seeds.size(); ++i) {
    const auto& s = report.seeds[i];
    csv << i << ',' << s.seed << ',' << fmt_double(s.dis_segia_w1) << ',' << fmt_double(s.dis_gia_w1) << ','
        << fmt_double(s.dis_segia_tv) << ',' << fmt_double(s.dis_gia_tv) << ',' << fmt_double(s.defended_loss_segia)
        << ',' << fmt_double(s.defended_loss_gia) << ',' << s.surviving_segia << ',' << s.injected_edges_segia << ','
        << s.surviving_gia << ',' << s.injected_edges_gia << ',' << s.homophily_holds << ',' << s.loss_holds
        << '\n';
  }
  return {out, true};
}

}  // namespace segia
