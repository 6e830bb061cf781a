#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "segia/attack.hpp"
#include "segia/defense.hpp"
#include "segia/graph.hpp"
#include "segia/surrogate.hpp"

namespace segia {

inline constexpr const char* kVersion = "segia 0.1.0";

struct GraphSource {
  /// Empty dir means the synthetic generator.
  std::filesystem::path dir;
  SyntheticSpec synthetic;
  std::optional<std::size_t> n_classes;
};

struct ModelSpec {
  Variant variant = Variant::PrSGC;
  double epsilon = 0.1;
  TrainOptions train;
  std::optional<std::filesystem::path> checkpoint;
};

enum class AttackMethod { Segia, Random, MultiEdge };

std::string_view to_string(AttackMethod m);
AttackMethod parse_attack_method(std::string_view s);

struct SweepAxes {
  std::vector<double> alpha;
  std::vector<std::size_t> depth;
  std::vector<double> perturbation_rate;
  std::size_t seeds = 1;
};

/// Resolved experiment description. JSON layout:
///
///   {"seed": 0, "out": "out", "jobs": 1,
///    "graph": {"dir": "...", "n_classes": 7} | {"synthetic": {"n": 400, ...}},
///    "surrogate": {"variant": "prsgc", "epsilon": 0.1, "lr": 0.2, "epochs": 300, "checkpoint": "..."},
///    "victim": {...same keys...},
///    "attack": {"alpha": 1, "epsilon": 0.1, "K": 2, "m": 10, "T": 200, "step_size": 0.05,
///               "perturbation_rate": 0.05, "anchor_rule": "target-self", "label_mode": "ground-truth",
///               "method": "segia", "edges_per_node": 3, "runs": 1, "plan": "..."},
///    "defense": {"epsilon": 0.1},
///    "sweep": {"alpha": [...], "K": [...], "perturbation_rate": [...], "seeds": 1},
///    "theorem1": {"n_seeds": 10, "edges_per_node": 3, "comparator_epsilon": -1}}
///
/// Every key is optional. Training and attack seeds are derived from "seed".
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  int jobs = 1;
  GraphSource graph;
  ModelSpec surrogate;
  ModelSpec victim{Variant::GCN2, -1.0, {}, std::nullopt};
  AttackConfig attack;
  AttackMethod method = AttackMethod::Segia;
  std::size_t edges_per_node = 3;
  std::size_t runs = 1;
  std::optional<std::filesystem::path> plan;
  double defense_epsilon = 0.1;
  SweepAxes sweep;
  Theorem1Options theorem1;

  /// Throws ValidationError; `sweep_mode` additionally requires nonempty axes.
  void validate(bool sweep_mode = false) const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig defaults = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Seeds of the training runs and of attack run `index`.
std::uint64_t surrogate_seed(const ExperimentConfig& cfg);
std::uint64_t victim_seed(const ExperimentConfig& cfg);
std::uint64_t attack_seed(const ExperimentConfig& cfg, std::uint64_t index);

AttributedGraph load_source(const GraphSource& src);
/// Loads the checkpoint when one is configured, otherwise trains on `g`.
SurrogateModel obtain_model(const ModelSpec& spec, const AttributedGraph& g, std::uint64_t seed);
void save_checkpoint(const SurrogateModel& model, const ExperimentConfig& cfg, const std::filesystem::path& path);
SurrogateModel load_checkpoint(const std::filesystem::path& path);

struct RunMetrics {
  AttackMethod method = AttackMethod::Segia;
  std::uint64_t seed = 0;
  std::size_t node_budget = 0;
  std::size_t edge_budget = 0;
  // Victim misclassification rates on the targets.
  double clean_rate = 0.0;
  double attacked_rate = 0.0;
  double defended_clean_rate = 0.0;
  double defended_rate = 0.0;
  // Sum of target cross-entropies under the attacker's surrogate view.
  double surrogate_loss_clean = 0.0;
  double surrogate_loss_attacked = 0.0;
  double homophily_w1 = 0.0;
  double homophily_tv = 0.0;
  std::size_t surviving_injected_edges = 0;
  double mean_anchor_similarity = 0.0;
  std::optional<AttackTrace> trace;
};

struct AttackRun {
  AttackedGraph graph;
  RunMetrics metrics;
};

/// One attack (cfg.seed as given) followed by the clean, attacked and defended evaluation.
AttackRun run_attack(const AttributedGraph& g, const SurrogateModel& surrogate, const SurrogateModel& victim,
                     const AttackConfig& cfg, AttackMethod method, std::size_t edges_per_node,
                     double defense_epsilon);

/// Share of iterations whose loss did not rise above the previous one.
double non_increasing_fraction(const AttackTrace& t);

nlohmann::json to_json(const RunMetrics& m);

/// theorem1_check on the configured graph and surrogate, seeds rooted at attack_seed(cfg, 0).
Theorem1Report run_theorem1(const ExperimentConfig& cfg);

struct CommandResult {
  std::filesystem::path output;
  /// False when some requested run failed; the command still wrote its outputs.
  bool ok = true;
};

CommandResult cmd_gen_synthetic(const ExperimentConfig& cfg);
/// `role` is "surrogate" or "victim".
CommandResult cmd_train(const ExperimentConfig& cfg, const std::string& role = "surrogate");
CommandResult cmd_attack(const ExperimentConfig& cfg);
CommandResult cmd_defend(const ExperimentConfig& cfg);
CommandResult cmd_evaluate(const ExperimentConfig& cfg);
CommandResult cmd_sweep(const ExperimentConfig& cfg);
CommandResult cmd_theorem1(const ExperimentConfig& cfg);

/// Writes `j` with 2-space indentation and full double precision.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace segia
