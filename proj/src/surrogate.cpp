#include "segia/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "segia/error.hpp"
#include "segia/kernels.hpp"

namespace segia {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::SGC: return "SGC";
    case Variant::PrSGC: return "PrSGC";
    case Variant::GCN2: return "GCN2";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "SGC" || name == "sgc") return Variant::SGC;
  if (name == "PrSGC" || name == "prsgc") return Variant::PrSGC;
  if (name == "GCN2" || name == "gcn2" || name == "GCN" || name == "gcn") return Variant::GCN2;
  throw ValidationError("unknown model variant '" + std::string(name) + "'");
}

double cosine_sim(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("cosine_sim: vector lengths differ");
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) return 0.0;
  return std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0);
}

std::vector<double> cosine_sim_grad(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("cosine_sim_grad: vector lengths differ");
  std::vector<double> g(x.size(), 0.0);
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) return g;
  const double nx = std::sqrt(xx);
  const double ny = std::sqrt(yy);
  const double sim = xy / (nx * ny);
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = y[i] / (nx * ny) - sim * x[i] / xx;
  return g;
}

std::size_t PruningMask::pruned_edge_count() const {
  std::size_t zeros = 0;
  for (double v : mask.values())
    if (v == 0.0) ++zeros;
  return zeros / 2;
}

PruningMask build_pruning_mask(const Topology& topology, const Matrix& features, double epsilon) {
  if (!(epsilon >= -1.0 && epsilon <= 1.0)) throw ValidationError("pruning threshold must lie in [-1, 1]");
  if (features.rows() != topology.n_nodes()) throw DimensionError("build_pruning_mask: feature rows != nodes");
  const std::size_t n = topology.n_nodes();
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  for (node_t u = 0; u < n; ++u) {
    bool diagonal_done = false;
    for (node_t v : topology.neighbors(u)) {
      if (!diagonal_done && v > u) {
        col_idx.push_back(u);
        values.push_back(1.0);
        diagonal_done = true;
      }
      col_idx.push_back(v);
      values.push_back(cosine_sim(features.row(u), features.row(v)) >= epsilon ? 1.0 : 0.0);
    }
    if (!diagonal_done) {
      col_idx.push_back(u);
      values.push_back(1.0);
    }
    row_ptr[u + 1] = col_idx.size();
  }
  return {CsrMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::move(values)), epsilon};
}

PruningMask build_pruning_mask(const AttributedGraph& g, double epsilon) {
  return build_pruning_mask(g.topology(), g.features(), epsilon);
}

CsrMatrix masked_adjacency(const NormalizedAdjacency& adj, const PruningMask& mask) {
  if (!adj.matrix.same_pattern(mask.mask)) throw DimensionError("masked_adjacency: mask pattern differs from Â");
  CsrMatrix out = adj.matrix;
  auto& v = out.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] *= mask.mask.values()[k];
  return out;
}

namespace {

Matrix glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(fan_in, fan_out);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

}  // namespace

SurrogateModel SurrogateModel::initial(Variant variant, std::size_t n_features, std::size_t n_classes,
                                       std::uint64_t seed, double epsilon, std::size_t hidden) {
  SurrogateModel m;
  m.variant = variant;
  m.epsilon = epsilon;
  if (variant == Variant::GCN2) {
    std::mt19937_64 rng(seed);
    m.weights.push_back(glorot(n_features, hidden, rng));
    m.weights.push_back(glorot(hidden, n_classes, rng));
  } else {
    m.weights.emplace_back(n_features, n_classes);
  }
  return m;
}

void SurrogateModel::validate(std::size_t d, std::size_t c) const {
  const std::size_t expected = variant == Variant::GCN2 ? 2 : 1;
  if (weights.size() != expected) throw DimensionError("model: wrong number of weight matrices for variant");
  if (weights.front().rows() != d) {
    throw DimensionError("model expects " + std::to_string(weights.front().rows()) + " features, graph has " +
                         std::to_string(d));
  }
  if (weights.back().cols() != c) {
    throw DimensionError("model expects " + std::to_string(weights.back().cols()) + " classes, graph has " +
                         std::to_string(c));
  }
  if (variant == Variant::GCN2 && weights[0].cols() != weights[1].rows()) {
    throw DimensionError("model: hidden widths disagree");
  }
  if (variant == Variant::PrSGC && !(epsilon >= -1.0 && epsilon <= 1.0)) {
    throw ValidationError("PrSGC threshold must lie in [-1, 1]");
  }
}

CsrMatrix propagation_matrix(const SurrogateModel& model, const Topology& topology, const Matrix& features) {
  auto adj = normalize_adjacency(topology);
  if (model.variant != Variant::PrSGC) return std::move(adj.matrix);
  return masked_adjacency(adj, build_pruning_mask(topology, features, model.epsilon));
}

Matrix forward_logits(const SurrogateModel& model, const Topology& topology, const Matrix& features) {
  if (features.rows() != topology.n_nodes()) throw DimensionError("forward_logits: feature rows != nodes");
  if (model.weights.empty()) throw DimensionError("forward_logits: model has no weights");
  model.validate(features.cols(), model.n_classes());
  const CsrMatrix prop = propagation_matrix(model, topology, features);
  if (model.is_linear()) {
    return kernels::spmm(prop, kernels::spmm(prop, kernels::gemm(features, model.weights[0])));
  }
  Matrix hidden = kernels::relu(kernels::gemm(kernels::spmm(prop, features), model.weights[0]));
  return kernels::spmm(prop, kernels::gemm(hidden, model.weights[1]));
}

Matrix forward_logits(const SurrogateModel& model, const AttributedGraph& g) {
  return forward_logits(model, g.topology(), g.features());
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, int label) {
  CrossEntropy ce;
  ce.grad.resize(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    ce.grad[c] = std::exp(logits[c] - mx);
    sum += ce.grad[c];
  }
  for (double& p : ce.grad) p /= sum;
  const auto y = static_cast<std::size_t>(label);
  ce.loss = -(logits[y] - mx - std::log(sum));
  ce.grad[y] -= 1.0;
  return ce;
}

namespace {

void require_all_classes_labeled(const AttributedGraph& g) {
  if (g.labeled().empty()) throw PreconditionError("training requires a nonempty labeled set");
  std::vector<char> seen(g.n_classes(), 0);
  for (node_t u : g.labeled()) seen[static_cast<std::size_t>(g.labels()[u])] = 1;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) throw PreconditionError("class " + std::to_string(c) + " has no labeled node");
  }
}

// Intermediate values of one forward pass kept for backpropagation.
struct ForwardCache {
  CsrMatrix prop;
  Matrix propagated;  // Â²X (linear) or ÂX (GCN2)
  Matrix hidden_pre;  // GCN2 only
  Matrix hidden_agg;  // Â·ReLU(ÂXW1), GCN2 only
  Matrix logits;
};

ForwardCache forward_cached(const SurrogateModel& model, const AttributedGraph& g) {
  ForwardCache c;
  c.prop = propagation_matrix(model, g.topology(), g.features());
  if (model.is_linear()) {
    c.propagated = kernels::spmm(c.prop, kernels::spmm(c.prop, g.features()));
    c.logits = kernels::gemm(c.propagated, model.weights[0]);
  } else {
    c.propagated = kernels::spmm(c.prop, g.features());
    c.hidden_pre = kernels::gemm(c.propagated, model.weights[0]);
    c.hidden_agg = kernels::spmm(c.prop, kernels::relu(c.hidden_pre));
    c.logits = kernels::gemm(c.hidden_agg, model.weights[1]);
  }
  return c;
}

// Mean labeled loss and its gradient w.r.t. the logits (zero on unlabeled rows).
double labeled_loss(const AttributedGraph& g, const Matrix& logits, Matrix* dlogits) {
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(g.labeled().size());
  if (dlogits) *dlogits = Matrix(logits.rows(), logits.cols());
  for (node_t u : g.labeled()) {
    auto ce = softmax_cross_entropy(logits.row(u), g.labels()[u]);
    total += ce.loss;
    if (dlogits) {
      auto dst = dlogits->row(u);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = ce.grad[k] * scale;
    }
  }
  return total * scale;
}

std::vector<Matrix> backward(const SurrogateModel& model, const ForwardCache& c, const Matrix& dlogits) {
  if (model.is_linear()) return {kernels::gemm_tn(c.propagated, dlogits)};
  Matrix dw2 = kernels::gemm_tn(c.hidden_agg, dlogits);
  // Â is symmetric, so its transpose-product is another spmm.
  Matrix dh = kernels::spmm(c.prop, kernels::gemm_nt(dlogits, model.weights[1]));
  for (std::size_t i = 0; i < dh.size(); ++i)
    if (c.hidden_pre.values()[i] <= 0.0) dh.values()[i] = 0.0;
  Matrix dw1 = kernels::gemm_tn(c.propagated, dh);
  return {std::move(dw1), std::move(dw2)};
}

}  // namespace

double training_loss(const SurrogateModel& model, const AttributedGraph& g) {
  require_all_classes_labeled(g);
  return labeled_loss(g, forward_logits(model, g), nullptr);
}

std::vector<Matrix> training_gradient(const SurrogateModel& model, const AttributedGraph& g) {
  require_all_classes_labeled(g);
  model.validate(g.n_features(), g.n_classes());
  auto cache = forward_cached(model, g);
  Matrix dlogits;
  labeled_loss(g, cache.logits, &dlogits);
  return backward(model, cache, dlogits);
}

TrainResult train(SurrogateModel model, const AttributedGraph& g, const TrainOptions& opts) {
  require_all_classes_labeled(g);
  if (model.weights.empty()) {
    model = SurrogateModel::initial(model.variant, g.n_features(), g.n_classes(), opts.seed, model.epsilon);
  }
  model.validate(g.n_features(), g.n_classes());
  if (!(opts.lr > 0.0)) throw ValidationError("learning rate must be positive");

  TrainResult result;
  auto cache = forward_cached(model, g);
  double step = opts.lr;
  if (model.is_linear()) {
    // The mean cross-entropy of a linear model is L-smooth with
    // L <= 0.5 * mean ||s_u||^2 over labeled rows s_u of (Â⊙P)²X; a step of
    // at most 1/L makes every update a descent step.
    double sq = 0.0;
    for (node_t u : g.labeled())
      for (double v : cache.propagated.row(u)) sq += v * v;
    const double smooth = 0.5 * sq / static_cast<double>(g.labeled().size());
    if (smooth > 0.0) step = std::min(step, 1.0 / smooth);
  }
  result.step = step;

  Matrix dlogits;
  for (std::size_t epoch = 0; epoch <= opts.epochs; ++epoch) {
    const bool last = epoch == opts.epochs;
    const double loss = labeled_loss(g, cache.logits, last ? nullptr : &dlogits);
    if (!std::isfinite(loss)) {
      throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.losses.push_back(loss);
    if (last) break;
    auto grads = backward(model, cache, dlogits);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      grads[i] *= -step;
      model.weights[i] += grads[i];
    }
    if (model.is_linear()) {
      cache.logits = kernels::gemm(cache.propagated, model.weights[0]);
    } else {
      cache.hidden_pre = kernels::gemm(cache.propagated, model.weights[0]);
      cache.hidden_agg = kernels::spmm(cache.prop, kernels::relu(cache.hidden_pre));
      cache.logits = kernels::gemm(cache.hidden_agg, model.weights[1]);
    }
  }
  result.final_loss = result.losses.back();
  model.trained_on = g.fingerprint();
  result.model = std::move(model);
  return result;
}

std::vector<int> argmax_rows(const Matrix& logits, std::span<const node_t> nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (node_t u : nodes) {
    auto row = logits.row(u);
    // max_element keeps the first maximum, i.e. the smaller class id on ties.
    out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

std::vector<int> predict(const SurrogateModel& model, const Topology& topology, const Matrix& features,
                         std::span<const node_t> nodes) {
  return argmax_rows(forward_logits(model, topology, features), nodes);
}

std::vector<int> predict(const SurrogateModel& model, const AttributedGraph& g, std::span<const node_t> nodes) {
  return predict(model, g.topology(), g.features(), nodes);
}

double loss_on_targets(const SurrogateModel& model, const Topology& topology, const Matrix& features,
                       std::span<const node_t> targets, std::span<const int> labels) {
  if (targets.empty()) throw ValidationError("loss_on_targets: empty target set");
  Matrix logits = forward_logits(model, topology, features);
  double total = 0.0;
  for (node_t t : targets) total += softmax_cross_entropy(logits.row(t), labels[t]).loss;
  return total;
}

double loss_on_targets(const SurrogateModel& model, const AttributedGraph& g, std::span<const node_t> targets) {
  return loss_on_targets(model, g.topology(), g.features(), targets, g.labels());
}

nlohmann::json to_json(const SurrogateModel& model) {
  nlohmann::json weights = nlohmann::json::array();
  for (const Matrix& w : model.weights) {
    weights.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"values", w.values()}});
  }
  return {{"variant", to_string(model.variant)},
          {"epsilon", model.epsilon},
          {"weights", weights},
          {"graph_fingerprint", model.trained_on}};
}

SurrogateModel model_from_json(const nlohmann::json& j) {
  try {
    SurrogateModel m;
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.epsilon = j.at("epsilon").get<double>();
    m.trained_on = j.at("graph_fingerprint").get<std::uint64_t>();
    for (const auto& w : j.at("weights")) {
      Matrix mat(w.at("rows").get<std::size_t>(), w.at("cols").get<std::size_t>());
      auto values = w.at("values").get<std::vector<double>>();
      if (values.size() != mat.size()) throw DimensionError("checkpoint weight array has wrong length");
      mat.values() = std::move(values);
      m.weights.push_back(std::move(mat));
    }
    m.validate(m.n_features(), m.n_classes());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model checkpoint: ") + e.what());
  }
}

}  // namespace segia
