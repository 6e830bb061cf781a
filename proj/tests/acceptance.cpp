// Acceptance gate: one PASS/FAIL/SKIP line per criterion, tolerances fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "segia/attack.hpp"
#include "segia/defense.hpp"
#include "segia/experiment.hpp"
#include "segia/seed.hpp"
#include "segia/synthesizer.hpp"

using namespace segia;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kExactTol = 1e-12;
constexpr std::size_t kSeeds = 10;
constexpr double kHomophilyRate = 0.9;
constexpr double kLossRate = 0.8;
constexpr double kTheoremSeconds = 600.0;
constexpr double kGap = 0.05;
constexpr double kCoraDrop = 0.05;
constexpr double kCoraIndicative = 0.877;
constexpr double kCoraIndicativeTol = 0.08;

int failures = 0;

void line(const char* status, int id, const std::string& what, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", status, id, what.c_str(), detail.c_str());
  std::fflush(stdout);
}

void verdict(int id, const std::string& what, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  line(pass ? "PASS" : "FAIL", id, what, detail);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

double oracle_training_loss(const SurrogateModel& m, const AttributedGraph& g) {
  const auto x = oracle::from(g.features());
  const auto z = m.variant == Variant::GCN2
                     ? oracle::gcn2_logits(g.topology(), x, oracle::from(m.weights[0]), oracle::from(m.weights[1]))
                     : oracle::sgc_logits(g.topology(), x, oracle::from(m.weights[0]),
                                          m.variant == Variant::PrSGC ? m.epsilon : -1.0);
  double s = 0.0;
  for (node_t u : g.labeled()) s += oracle::cross_entropy(z[u], g.labels()[u]);
  return s / static_cast<double>(g.labeled().size());
}

double oracle_attack_loss(const AttributedGraph& base, const AttackedGraph& ag, const SurrogateModel& m,
                          const AttackConfig& cfg) {
  const auto x = oracle::from(ag.features);
  const auto z = oracle::sgc_logits(ag.topology, x, oracle::from(m.weights[0]), cfg.epsilon);
  double tgt = 0.0;
  for (node_t t : base.targets()) tgt += oracle::cross_entropy(z[t], base.labels()[t]);
  double sim = 0.0;
  for (std::size_t i = 0; i < ag.plan.n_injected; ++i) sim += oracle::cosine(x[ag.n_original + i], x[ag.plan.anchors[i]]);
  return -tgt - cfg.alpha * sim;
}

AttackedGraph random_injection(const AttributedGraph& g, std::mt19937_64& rng, std::size_t n_inj) {
  InjectionPlan plan;
  plan.n_injected = n_inj;
  plan.features = oracle::random_matrix(n_inj, g.n_features(), rng);
  for (std::size_t i = 0; i < n_inj; ++i) {
    const node_t t = g.targets()[i % g.targets().size()];
    plan.assigned_target.push_back(t);
    plan.anchors.push_back(t);
  }
  return compose(g, plan);
}

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  double worst_train = 0.0, worst_attack = 0.0, worst_gen = 0.0;
  constexpr int instances = 20;
  for (int k = 0; k < instances; ++k) {
    const std::size_t n = 12 + static_cast<std::size_t>(k) % 19;  // 12..30
    const std::size_t d = 2 + static_cast<std::size_t>(k) % 7;    // 2..8
    const std::size_t c = 2 + static_cast<std::size_t>(k) % 3;
    const auto g = oracle::random_graph(n, d, c, rng);

    // Training loss w.r.t. every weight matrix.
    const Variant v = k % 3 == 0 ? Variant::SGC : k % 3 == 1 ? Variant::PrSGC : Variant::GCN2;
    auto m = SurrogateModel::initial(v, d, c, rng(), v == Variant::PrSGC ? 0.0 : -1.0, 6);
    for (auto& w : m.weights) w = oracle::random_matrix(w.rows(), w.cols(), rng, 0.5);
    const auto grads = training_gradient(m, g);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      std::vector<double> numeric(m.weights[l].size());
      for (std::size_t i = 0; i < numeric.size(); ++i)
        numeric[i] = oracle::central_difference([&] { return oracle_training_loss(m, g); }, m.weights[l].values()[i], 1e-6);
      worst_train = std::max(worst_train, oracle::relative_error(grads[l].values(), numeric));
    }

    // Attack loss w.r.t. injected features.
    auto sgc = SurrogateModel::initial(Variant::SGC, d, c, 0);
    sgc.weights[0] = oracle::random_matrix(d, c, rng);
    auto ag = random_injection(g, rng, 1 + static_cast<std::size_t>(k) % 3);
    AttackConfig cfg;
    cfg.alpha = 0.25 * k;
    cfg.epsilon = k % 2 ? -1.0 : 0.0;
    const auto analytic = attack_gradient(g, ag, sgc, cfg);
    std::vector<double> numeric;
    for (std::size_t i = 0; i < ag.plan.n_injected; ++i)
      for (std::size_t j = 0; j < d; ++j)
        numeric.push_back(oracle::central_difference([&] { return oracle_attack_loss(g, ag, sgc, cfg); },
                                                     ag.features(g.n_nodes() + i, j), 1e-6));
    worst_attack = std::max(worst_attack, oracle::relative_error(analytic.values(), numeric));

    // Generator weights and bias through the reverse convolution.
    const std::size_t depth = 1 + static_cast<std::size_t>(k) % 3;
    const auto nb = sample_neighborhood(g.topology(), g.targets(), depth, 3, rng());
    auto weights = init_generator(depth, d, rng()).weights();
    std::vector<double> bias(d, 0.05);
    const Matrix upstream = oracle::random_matrix(nb.layers[0].size(), d, rng);
    auto objective = [&] {
      ReverseConvGenerator probe(weights, bias);
      const auto out = probe.synthesize(nb, g);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * upstream.values()[i];
      return s;
    };
    ReverseConvGenerator live(weights, bias);
    live.synthesize(nb, g);
    const auto gg = live.gradient(upstream);
    for (std::size_t l = 0; l < depth; ++l) {
      std::vector<double> num(weights[l].size());
      for (std::size_t i = 0; i < num.size(); ++i)
        num[i] = oracle::central_difference(objective, weights[l].values()[i], 1e-7);
      worst_gen = std::max(worst_gen, oracle::relative_error(gg.weights[l].values(), num));
    }
    std::vector<double> num(d);
    for (std::size_t j = 0; j < d; ++j) num[j] = oracle::central_difference(objective, bias[j], 1e-7);
    worst_gen = std::max(worst_gen, oracle::relative_error(gg.bias, num));
  }
  const double secs = seconds_since(t0);
  const double worst = std::max({worst_train, worst_attack, worst_gen});
  verdict(1, "gradient correctness",
          worst < kGradTol && secs < kGradSeconds,
          fmt("20 instances each; max rel. error train %.2e, attack %.2e, generator %.2e (tol 1e-4); %.1fs", worst_train,
              worst_attack, worst_gen, secs));
}

// ---------------------------------------------------------------------------

void criterion_degeneracy() {
  std::mt19937_64 rng(2002);
  double logits_gap = 0.0, loss_gap = 0.0;
  bool identity = true;
  for (int k = 0; k < 20; ++k) {
    const auto g = oracle::random_graph(10 + 2 * static_cast<std::size_t>(k), 5, 3, rng);
    auto sgc = SurrogateModel::initial(Variant::SGC, 5, 3, 0);
    sgc.weights[0] = oracle::random_matrix(5, 3, rng);
    auto pr = sgc;
    pr.variant = Variant::PrSGC;
    pr.epsilon = -1.0;
    logits_gap = std::max(logits_gap, max_abs_diff(forward_logits(sgc, g), forward_logits(pr, g)));

    const auto ag = random_injection(g, rng, 2);
    AttackConfig cfg;
    cfg.alpha = 0.0;
    cfg.epsilon = -1.0;
    const double lt = loss_on_targets(sgc, ag.topology, ag.features, g.targets(), g.labels());
    loss_gap = std::max(loss_gap, std::abs(attack_loss(g, ag, sgc, cfg) + lt) / std::max(1.0, std::abs(lt)));

    identity = identity && prune_defense(g, -1.0).topology == g.topology() &&
               prune_defense(ag, -1.0).topology == ag.topology;
  }
  verdict(2, "degeneracy identities", logits_gap < kExactTol && loss_gap < kExactTol && identity,
          fmt("PrSGC(-1) vs SGC %.1e, L_atk(alpha=0) + L_tgt %.1e (tol 1e-12), prune(-1) identity ", logits_gap,
              loss_gap) +
              (identity ? "yes" : "no"));
}

// ---------------------------------------------------------------------------

struct Benchmark {
  ExperimentConfig cfg;
  AttributedGraph g;
  SurrogateModel surrogate;
  SurrogateModel victim;
};

Benchmark default_benchmark() {
  Benchmark b;
  b.g = load_source(b.cfg.graph);
  b.surrogate = obtain_model(b.cfg.surrogate, b.g, surrogate_seed(b.cfg));
  b.victim = obtain_model(b.cfg.victim, b.g, victim_seed(b.cfg));
  return b;
}

struct Effectiveness {
  double clean = 0.0, random = 0.0, segia = 0.0, undefended = 0.0, seconds = 0.0;
};

Effectiveness criterion_budget(const Benchmark& b) {
  std::vector<RunMetrics> segia(kSeeds), random(kSeeds), multi(kSeeds);
  const auto t0 = std::chrono::steady_clock::now();
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(kSeeds); ++i) {
    AttackConfig ac = b.cfg.attack;
    ac.seed = attack_seed(b.cfg, static_cast<std::uint64_t>(i));
    const auto idx = static_cast<std::size_t>(i);
    segia[idx] = run_attack(b.g, b.surrogate, b.victim, ac, AttackMethod::Segia, 1, b.cfg.defense_epsilon).metrics;
    random[idx] = run_attack(b.g, b.surrogate, b.victim, ac, AttackMethod::Random, 1, b.cfg.defense_epsilon).metrics;
    multi[idx] = run_attack(b.g, b.surrogate, b.victim, ac, AttackMethod::MultiEdge, 3, b.cfg.defense_epsilon).metrics;
  }

  bool single = true, triple = true;
  for (std::size_t i = 0; i < kSeeds; ++i) {
    single = single && segia[i].edge_budget == segia[i].node_budget && random[i].edge_budget == random[i].node_budget;
    triple = triple && multi[i].edge_budget == 3 * multi[i].node_budget;
  }
  // Published budgets for the multi-edge comparator: 6,297 edges for 2,099 nodes.
  const bool table_ratio = 6297 % 2099 == 0 && 6297 / 2099 == 3;
  verdict(3, "single-edge budget", single && triple && table_ratio,
          fmt("%g SEGIA + %g random runs with edges == nodes (%g each); multi-edge 3x in all runs", kSeeds, kSeeds,
              static_cast<double>(segia[0].node_budget)) +
              (triple ? "" : " [multi-edge ratio broken]"));

  double clean = 0.0, rnd = 0.0, att = 0.0, und = 0.0;
  for (std::size_t i = 0; i < kSeeds; ++i) {
    clean += segia[i].defended_clean_rate;
    rnd += random[i].defended_rate;
    att += segia[i].defended_rate;
    und += segia[i].attacked_rate;
  }
  const double n = static_cast<double>(kSeeds);
  clean /= n;
  rnd /= n;
  att /= n;
  und /= n;
  return {clean, rnd, att, und, seconds_since(t0)};
}

void criterion_effectiveness(const Effectiveness& e) {
  verdict(5, "attack effectiveness ordering", e.segia - e.random > kGap && e.random - e.clean > kGap,
          fmt("defended misclassification over 10 seeds: SEGIA %.3f, random %.3f, clean %.3f (each gap > 0.05); "
              "SEGIA undefended %.3f",
              e.segia, e.random, e.clean, e.undefended) +
              fmt("; %.0fs", e.seconds));
}

void effectiveness_across_graphs() {
  // Informational: one attack per independently drawn benchmark graph.
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> clean(kSeeds), rnd(kSeeds), att(kSeeds);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(kSeeds); ++i) {
    ExperimentConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(i);
    cfg.graph.synthetic.seed = static_cast<std::uint64_t>(i);
    const auto g = load_source(cfg.graph);
    const auto sur = obtain_model(cfg.surrogate, g, surrogate_seed(cfg));
    const auto vic = obtain_model(cfg.victim, g, victim_seed(cfg));
    AttackConfig ac = cfg.attack;
    ac.seed = attack_seed(cfg, 0);
    const auto s = run_attack(g, sur, vic, ac, AttackMethod::Segia, 1, cfg.defense_epsilon).metrics;
    const auto r = run_attack(g, sur, vic, ac, AttackMethod::Random, 1, cfg.defense_epsilon).metrics;
    const auto idx = static_cast<std::size_t>(i);
    clean[idx] = s.defended_clean_rate;
    att[idx] = s.defended_rate;
    rnd[idx] = r.defended_rate;
  }
  double c = 0, r = 0, a = 0;
  for (std::size_t i = 0; i < kSeeds; ++i) {
    c += clean[i];
    r += rnd[i];
    a += att[i];
  }
  const double n = static_cast<double>(kSeeds);
  line("INFO", 5, "ordering across 10 graph draws",
       fmt("SEGIA %.3f, random %.3f, clean %.3f; %.0fs", a / n, r / n, c / n, seconds_since(t0)));
}

// ---------------------------------------------------------------------------

void criterion_theorem1() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.theorem1.n_seeds = kSeeds;
  const Theorem1Report r = run_theorem1(cfg);
  const double secs = seconds_since(t0);
  std::size_t tv = 0;
  for (const auto& s : r.seeds) tv += s.dis_segia_tv <= s.dis_gia_tv;
  verdict(4, "homophily and defended-loss inequalities",
          r.homophily_rate >= kHomophilyRate && r.loss_rate >= kLossRate && secs < kTheoremSeconds,
          fmt("homophily distance (W1) holds %.0f/10 (need 9), defended loss holds %.0f/10 (need 8), "
              "TV variant %.0f/10; %.0fs",
              r.homophily_rate * 10.0, r.loss_rate * 10.0, static_cast<double>(tv), secs));
}

// ---------------------------------------------------------------------------

struct CoraResult {
  double clean_accuracy = 0.0;
  double attacked_accuracy = 0.0;
};

CoraResult cora_style(const AttributedGraph& g, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  const auto sur = obtain_model(cfg.surrogate, g, surrogate_seed(cfg));
  const auto vic = obtain_model(cfg.victim, g, victim_seed(cfg));
  AttackConfig ac = cfg.attack;
  ac.perturbation_rate = 0.01;
  ac.seed = attack_seed(cfg, 0);
  const auto m = run_attack(g, sur, vic, ac, AttackMethod::Segia, 1, cfg.defense_epsilon).metrics;
  return {1.0 - m.clean_rate, 1.0 - m.attacked_rate};
}

void criterion_cora() {
  const char* dir = std::getenv("SEGIA_CORA_DIR");
  if (dir == nullptr || *dir == '\0') {
    line("SKIP", 6, "Cora-format check", "SEGIA_CORA_DIR not set");
  } else {
    try {
      const auto g = load_graph(GraphFiles::in(dir));
      const auto r = cora_style(g, 0);
      const double drop = r.clean_accuracy - r.attacked_accuracy;
      verdict(6, "Cora-format check", drop >= kCoraDrop,
              fmt("N=%g, clean accuracy %.3f, attacked %.3f, drop %.3f (need 0.05)", static_cast<double>(g.n_nodes()),
                  r.clean_accuracy, r.attacked_accuracy, drop));
      const bool near = std::abs(r.attacked_accuracy - kCoraIndicative) <= kCoraIndicativeTol;
      line("INFO", 6, "indicative published accuracy",
           fmt("attacked %.3f vs 0.877 +/- 0.08: %s", r.attacked_accuracy) + (near ? "within" : "outside"));
    } catch (const std::exception& e) {
      verdict(6, "Cora-format check", false, e.what());
    }
  }

  // Same pipeline on a synthetic graph of the same size and class count.
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec spec;
  spec.n = 2708;
  spec.c = 7;
  spec.d = 16;
  spec.p_in = 0.01;
  spec.p_out = 0.0005;
  const auto g = generate_synthetic(spec);
  const auto r = cora_style(g, 0);
  line("INFO", 6, "Cora-scale synthetic proxy",
       fmt("N=%g, clean accuracy %.3f, attacked %.3f; %.0fs", static_cast<double>(g.n_nodes()), r.clean_accuracy,
           r.attacked_accuracy, seconds_since(t0)));
}

// ---------------------------------------------------------------------------

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "segia_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig cfg;
  cfg.out_dir = root / "run";
  cfg.runs = 2;
  cfg.attack.iterations = 50;
  cfg.sweep.alpha = {0.0, 1.0};
  cfg.sweep.depth = {1, 2};
  cfg.sweep.perturbation_rate = {0.05};
  cfg.theorem1.n_seeds = 2;

  const std::vector<std::string> files{"surrogate.json",  "surrogate_train_log.json", "summary.json",
                                       "plan_0.json",     "plan_1.json",              "report_1.json",
                                       "attacked_graph_0/features.csv", "sweep.csv", "sweep.json",
                                       "theorem1.json",   "theorem1.csv"};
  auto run_all = [&] {
    cmd_train(cfg, "surrogate");
    cmd_attack(cfg);
    cmd_sweep(cfg);
    cmd_theorem1(cfg);
    std::vector<std::string> out;
    for (const auto& f : files) out.push_back(slurp(cfg.out_dir / f));
    return out;
  };
  const auto first = run_all();
  const auto second = run_all();
  std::size_t same = 0;
  for (std::size_t i = 0; i < files.size(); ++i) same += !first[i].empty() && first[i] == second[i];

  auto parallel = cfg;
  parallel.jobs = 4;
  cmd_sweep(parallel);
  const bool jobs_invariant = slurp(cfg.out_dir / "sweep.csv") == first[7];

  verdict(7, "determinism", same == files.size() && jobs_invariant,
          fmt("%g/%g output files byte-identical on rerun; sweep.csv identical with 4 jobs: ",
              static_cast<double>(same), static_cast<double>(files.size())) +
              (jobs_invariant ? "yes" : "no"));
}

// ---------------------------------------------------------------------------

void criterion_oracles() {
  std::mt19937_64 rng(8008);
  double worst = 0.0;
  std::size_t graphs = 0;
  for (std::size_t n = 8; n <= 50; n += 3) {
    for (int rep = 0; rep < 2; ++rep, ++graphs) {
      const auto g = oracle::random_graph(n, 6, 3, rng, 0.1);
      const auto x = oracle::from(g.features());
      const auto w = oracle::random_matrix(6, 3, rng);
      for (double eps : {-1.0, 0.1}) {
        auto m = SurrogateModel::initial(eps < -0.5 ? Variant::SGC : Variant::PrSGC, 6, 3, 0, eps);
        m.weights[0] = w;
        worst = std::max(worst, oracle::max_diff(oracle::sgc_logits(g.topology(), x, oracle::from(w), eps),
                                                 forward_logits(m, g)));
      }
      const std::size_t depth = 1 + n % 3;
      const auto nb = sample_neighborhood(g.topology(), g.targets(), depth, 4, rng());
      auto gen = init_generator(depth, 6, rng());
      const auto out = gen.synthesize(nb, g);
      oracle::Dense h = oracle::from(g.features().gather_rows(nb.layers[depth]));
      for (std::size_t k = depth; k >= 1; --k) {
        const auto mk = oracle::restriction(g.topology(), nb.layers[k - 1], nb.layers[k]);
        worst = std::max(worst, oracle::max_diff(mk, nb.inter_layer[k - 1].to_dense()));
        h = oracle::matmul(oracle::row_normalized(mk), oracle::matmul(h, oracle::from(gen.weights()[k - 1])));
        for (auto& row : h)
          for (double& v : row) v = std::max(v, 0.0);
      }
      for (auto& row : h)
        for (std::size_t d = 0; d < row.size(); ++d)
          row[d] = std::clamp(row[d], g.feature_range()[d].min, g.feature_range()[d].max);
      worst = std::max(worst, oracle::max_diff(h, out));
    }
  }
  verdict(8, "oracle equivalence", worst < kExactTol,
          fmt("%g graphs with n <= 50; max deviation %.1e (tol 1e-12)", static_cast<double>(graphs), worst));
}

}  // namespace

int main() {
  try {
    criterion_gradients();
    criterion_degeneracy();
    const Benchmark b = default_benchmark();
    const Effectiveness e = criterion_budget(b);
    criterion_theorem1();
    criterion_effectiveness(e);
    effectiveness_across_graphs();
    criterion_cora();
    criterion_determinism();
    criterion_oracles();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criterion failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
