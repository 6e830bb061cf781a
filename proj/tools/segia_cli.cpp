// segia: command-line front end for single-edge graph injection experiments.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "segia/error.hpp"
#include "segia/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> jobs;
  std::string graph_dir;
  std::optional<double> alpha;
  std::optional<double> attack_epsilon;
  std::optional<double> defense_epsilon;
  std::optional<std::size_t> depth;
  std::optional<std::size_t> fanout;
  std::optional<std::size_t> iterations;
  std::optional<double> step;
  std::optional<double> rate;
  std::optional<std::size_t> runs;
  std::string method;
  std::string anchor_rule;
  std::string label_mode;
  std::string surrogate_ckpt;
  std::string victim_ckpt;
  std::string plan;
  std::optional<std::size_t> n_seeds;
  std::optional<std::size_t> epochs;
  std::vector<double> sweep_alpha;
  std::vector<std::size_t> sweep_depth;
  std::vector<double> sweep_rate;
  std::optional<std::size_t> sweep_seeds;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "global seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--jobs", c.jobs, "parallel runs")->check(CLI::PositiveNumber);
  app->add_option("--graph", c.graph_dir, "graph directory (edges.csv, features.csv, labels.csv, splits.json)");
}

void add_attack(CLI::App* app, Common& c) {
  app->add_option("--alpha", c.alpha, "similarity weight");
  app->add_option("--epsilon", c.attack_epsilon, "surrogate pruning threshold");
  app->add_option("--defense-epsilon", c.defense_epsilon, "defender pruning threshold");
  app->add_option("-K,--depth", c.depth, "sampled hops");
  app->add_option("-m,--fanout", c.fanout, "neighbors drawn per node and hop");
  app->add_option("-T,--iterations", c.iterations, "generator iterations");
  app->add_option("--step", c.step, "generator step size");
  app->add_option("--rate", c.rate, "perturbation rate (injected / original nodes)");
  app->add_option("--method", c.method, "segia | random | multiedge");
  app->add_option("--anchor", c.anchor_rule, "target-self | best-gradient");
  app->add_option("--labels", c.label_mode, "ground-truth | predicted");
  app->add_option("--surrogate", c.surrogate_ckpt, "surrogate checkpoint")->check(CLI::ExistingFile);
  app->add_option("--victim", c.victim_ckpt, "victim checkpoint")->check(CLI::ExistingFile);
}

segia::ExperimentConfig resolve(const Common& c) {
  segia::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = segia::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.jobs) cfg.jobs = *c.jobs;
  if (!c.graph_dir.empty()) cfg.graph.dir = c.graph_dir;
  if (c.alpha) cfg.attack.alpha = *c.alpha;
  if (c.attack_epsilon) cfg.attack.epsilon = *c.attack_epsilon;
  if (c.defense_epsilon) cfg.defense_epsilon = *c.defense_epsilon;
  if (c.depth) cfg.attack.depth = *c.depth;
  if (c.fanout) cfg.attack.fanout = *c.fanout;
  if (c.iterations) cfg.attack.iterations = *c.iterations;
  if (c.step) cfg.attack.step_size = *c.step;
  if (c.rate) cfg.attack.perturbation_rate = *c.rate;
  if (c.runs) cfg.runs = *c.runs;
  if (!c.method.empty()) cfg.method = segia::parse_attack_method(c.method);
  if (!c.anchor_rule.empty()) cfg.attack.anchor_rule = segia::parse_anchor_rule(c.anchor_rule);
  if (!c.label_mode.empty()) cfg.attack.label_mode = segia::parse_label_mode(c.label_mode);
  if (!c.surrogate_ckpt.empty()) cfg.surrogate.checkpoint = c.surrogate_ckpt;
  if (!c.victim_ckpt.empty()) cfg.victim.checkpoint = c.victim_ckpt;
  if (!c.plan.empty()) cfg.plan = c.plan;
  if (c.n_seeds) cfg.theorem1.n_seeds = *c.n_seeds;
  if (!c.sweep_alpha.empty()) cfg.sweep.alpha = c.sweep_alpha;
  if (!c.sweep_depth.empty()) cfg.sweep.depth = c.sweep_depth;
  if (!c.sweep_rate.empty()) cfg.sweep.perturbation_rate = c.sweep_rate;
  if (c.sweep_seeds) cfg.sweep.seeds = *c.sweep_seeds;
  if (c.epochs) {
    cfg.surrogate.train.epochs = *c.epochs;
    cfg.victim.train.epochs = *c.epochs;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-edge graph injection attack toolkit"};
  app.set_version_flag("--version", std::string(segia::kVersion));
  app.require_subcommand(1);

  Common c;
  std::string role = "surrogate";

  auto* gen = app.add_subcommand("gen-synthetic", "sample the planted-partition benchmark graph");
  add_common(gen, c);

  auto* train = app.add_subcommand("train", "train a surrogate or victim model");
  add_common(train, c);
  train->add_option("--role", role, "surrogate | victim")->check(CLI::IsMember({"surrogate", "victim"}));
  train->add_option("--epochs", c.epochs, "training epochs");

  auto* attack = app.add_subcommand("attack", "run the attack and report clean/attacked/defended metrics");
  add_common(attack, c);
  add_attack(attack, c);
  attack->add_option("--runs", c.runs, "independent attack runs");

  auto* defend = app.add_subcommand("defend", "apply similarity pruning to a clean or attacked graph");
  add_common(defend, c);
  defend->add_option("--plan", c.plan, "injection plan to compose before pruning")->check(CLI::ExistingFile);
  defend->add_option("--defense-epsilon", c.defense_epsilon, "defender pruning threshold");

  auto* evaluate = app.add_subcommand("evaluate", "victim misclassification on clean, attacked and defended graphs");
  add_common(evaluate, c);
  evaluate->add_option("--plan", c.plan, "injection plan")->check(CLI::ExistingFile);
  evaluate->add_option("--victim", c.victim_ckpt, "victim checkpoint")->check(CLI::ExistingFile);
  evaluate->add_option("--defense-epsilon", c.defense_epsilon, "defender pruning threshold");

  auto* sweep = app.add_subcommand("sweep", "grid over alpha, K and perturbation rate");
  add_common(sweep, c);
  add_attack(sweep, c);
  sweep->add_option("--alphas", c.sweep_alpha, "alpha axis")->delimiter(',');
  sweep->add_option("--depths", c.sweep_depth, "K axis")->delimiter(',');
  sweep->add_option("--rates", c.sweep_rate, "perturbation-rate axis")->delimiter(',');
  sweep->add_option("--seeds-per-cell", c.sweep_seeds, "seeds per grid cell");

  auto* theorem = app.add_subcommand("theorem1", "paired homophily and defended-loss comparison");
  add_common(theorem, c);
  add_attack(theorem, c);
  theorem->add_option("--n-seeds", c.n_seeds, "number of paired seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    const segia::ExperimentConfig cfg = resolve(c);
    segia::CommandResult result;
    if (*gen) {
      result = segia::cmd_gen_synthetic(cfg);
    } else if (*train) {
      result = segia::cmd_train(cfg, role);
    } else if (*attack) {
      result = segia::cmd_attack(cfg);
    } else if (*defend) {
      result = segia::cmd_defend(cfg);
    } else if (*evaluate) {
      result = segia::cmd_evaluate(cfg);
    } else if (*sweep) {
      result = segia::cmd_sweep(cfg);
    } else {
      result = segia::cmd_theorem1(cfg);
    }
    std::cout << result.output.string() << '\n';
    return result.ok ? 0 : 1;
  } catch (const segia::PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return 3;
  } catch (const segia::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
