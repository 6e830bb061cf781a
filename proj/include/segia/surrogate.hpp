#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "segia/graph.hpp"
#include "segia/matrix.hpp"

namespace segia {

enum class Variant { SGC, PrSGC, GCN2 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_sim(std::span<const double> x, std::span<const double> y);

/// Gradient of cosine_sim(x, y) with respect to x (zero when either norm is zero).
std::vector<double> cosine_sim_grad(std::span<const double> x, std::span<const double> y);

/// Binary mask over the support of Â (edges plus diagonal). Stored with the
/// same sparsity pattern as normalize_adjacency() so the Hadamard product is
/// a value-wise multiply.
struct PruningMask {
  CsrMatrix mask;
  double threshold = -1.0;

  std::size_t pruned_edge_count() const;
};

PruningMask build_pruning_mask(const Topology& topology, const Matrix& features, double epsilon);
PruningMask build_pruning_mask(const AttributedGraph& g, double epsilon);

/// Â ⊙ P. Degrees stay those of the unpruned graph.
CsrMatrix masked_adjacency(const NormalizedAdjacency& adj, const PruningMask& mask);

struct SurrogateModel {
  Variant variant = Variant::SGC;
  /// {W} (D x C) for SGC/PrSGC, {W1 (D x H), W2 (H x C)} for GCN2.
  std::vector<Matrix> weights;
  /// Pruning threshold; only meaningful for PrSGC.
  double epsilon = -1.0;
  std::uint64_t trained_on = 0;

  std::size_t n_features() const { return weights.front().rows(); }
  std::size_t n_classes() const { return weights.back().cols(); }
  bool is_linear() const { return variant != Variant::GCN2; }

  /// Zero weights for the linear variants, Glorot-uniform for GCN2.
  static SurrogateModel initial(Variant variant, std::size_t n_features, std::size_t n_classes,
                                std::uint64_t seed, double epsilon = -1.0, std::size_t hidden = 16);

  void validate(std::size_t n_features, std::size_t n_classes) const;
};

/// Â for SGC and GCN2, Â ⊙ P(features, ε) for PrSGC.
CsrMatrix propagation_matrix(const SurrogateModel& model, const Topology& topology, const Matrix& features);

/// Pre-softmax logits: Â²XW, (Â⊙P)²XW or Â·ReLU(ÂXW1)W2.
Matrix forward_logits(const SurrogateModel& model, const Topology& topology, const Matrix& features);
Matrix forward_logits(const SurrogateModel& model, const AttributedGraph& g);

struct CrossEntropy {
  double loss = 0.0;
  /// d loss / d logits = softmax(logits) - onehot(label).
  std::vector<double> grad;
};

CrossEntropy softmax_cross_entropy(std::span<const double> logits, int label);

struct TrainOptions {
  double lr = 0.2;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
};

struct TrainResult {
  SurrogateModel model;
  /// losses[e] is the mean labeled cross-entropy before update e; the last
  /// entry is the loss of the returned model.
  std::vector<double> losses;
  double final_loss = 0.0;
  /// Step actually applied (linear variants cap it at the inverse smoothness bound).
  double step = 0.0;
};

/// Mean cross-entropy over the labeled set.
double training_loss(const SurrogateModel& model, const AttributedGraph& g);
/// Analytic gradient of training_loss() with respect to every weight matrix.
std::vector<Matrix> training_gradient(const SurrogateModel& model, const AttributedGraph& g);

/// Full-batch gradient descent on training_loss(). A model with empty weights
/// is initialized from `opts.seed` first.
TrainResult train(SurrogateModel model, const AttributedGraph& g, const TrainOptions& opts);

/// Row-wise argmax with ties resolved toward the smaller class id.
std::vector<int> argmax_rows(const Matrix& logits, std::span<const node_t> nodes);

std::vector<int> predict(const SurrogateModel& model, const Topology& topology, const Matrix& features,
                         std::span<const node_t> nodes);
std::vector<int> predict(const SurrogateModel& model, const AttributedGraph& g, std::span<const node_t> nodes);

/// Sum of cross-entropies of `targets` against `labels`.
double loss_on_targets(const SurrogateModel& model, const Topology& topology, const Matrix& features,
                       std::span<const node_t> targets, std::span<const int> labels);
double loss_on_targets(const SurrogateModel& model, const AttributedGraph& g, std::span<const node_t> targets);

nlohmann::json to_json(const SurrogateModel& model);
SurrogateModel model_from_json(const nlohmann::json& j);

}  // namespace segia
