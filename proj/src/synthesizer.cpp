#include "segia/synthesizer.hpp"

#include <cmath>
#include <random>
#include <string>

#include "segia/error.hpp"
#include "segia/kernels.hpp"

namespace segia {

ReverseConvGenerator::ReverseConvGenerator(std::vector<Matrix> weights, std::vector<double> bias, std::uint64_t seed)
    : weights_(std::move(weights)), bias_(std::move(bias)), seed_(seed) {
  if (weights_.empty()) throw DimensionError("generator needs at least one layer");
  for (const Matrix& w : weights_) {
    if (w.rows() != bias_.size() || w.cols() != bias_.size()) {
      throw DimensionError("generator weights must be square with side equal to the bias length");
    }
    for (double v : w.values())
      if (!std::isfinite(v)) throw ValidationError("generator weights must be finite");
  }
}

void ReverseConvGenerator::apply_update(const GeneratorGradient& grad, double step) {
  if (grad.weights.size() != weights_.size() || grad.bias.size() != bias_.size()) {
    throw DimensionError("generator update: gradient shape mismatch");
  }
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    auto& w = weights_[k].values();
    const auto& g = grad.weights[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * g[i];
  }
  for (std::size_t d = 0; d < bias_.size(); ++d) bias_[d] -= step * grad.bias[d];
  cache_.reset();
}

Matrix ReverseConvGenerator::synthesize(const SampledNeighborhood& nb, const AttributedGraph& g) {
  const std::size_t depth = weights_.size();
  if (nb.depth() != depth) {
    throw DimensionError("generator has " + std::to_string(depth) + " layers, neighborhood has depth " +
                         std::to_string(nb.depth()));
  }
  if (g.n_features() != dim()) {
    throw DimensionError("generator dimension " + std::to_string(dim()) + " != feature dimension " +
                         std::to_string(g.n_features()));
  }
  Cache c;
  c.activations.resize(depth + 1);
  c.aggregated.resize(depth);
  c.pre.resize(depth);
  c.transposed.resize(depth);
  c.activations[depth] = g.features().gather_rows(nb.layers[depth]);
  for (std::size_t k = depth; k >= 1; --k) {
    c.aggregated[k - 1] = kernels::spmm(nb.normalized[k - 1], c.activations[k]);
    c.pre[k - 1] = kernels::gemm(c.aggregated[k - 1], weights_[k - 1]);
    c.activations[k - 1] = kernels::relu(c.pre[k - 1]);
    c.transposed[k - 1] = nb.normalized[k - 1].transpose();
  }

  Matrix out = c.activations[0];
  const auto& range = g.feature_range();
  c.inside.assign(out.size(), 1);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t d = 0; d < out.cols(); ++d) {
      double v = out(r, d) + bias_[d];
      if (v < range[d].min) {
        v = range[d].min;
        c.inside[r * out.cols() + d] = 0;
      } else if (v > range[d].max) {
        v = range[d].max;
        c.inside[r * out.cols() + d] = 0;
      }
      out(r, d) = v;
    }
  }
  cache_ = std::move(c);
  return out;
}

const std::vector<Matrix>& ReverseConvGenerator::activations() const {
  if (!cache_) throw StateError("generator: no cached forward pass");
  return cache_->activations;
}

GeneratorGradient ReverseConvGenerator::gradient(const Matrix& upstream) const {
  if (!cache_) throw StateError("generator: gradient requested without a cached forward pass");
  const Cache& c = *cache_;
  if (upstream.rows() != c.activations[0].rows() || upstream.cols() != dim()) {
    throw DimensionError("generator gradient: upstream shape does not match the synthesized output");
  }
  GeneratorGradient grad;
  grad.weights.resize(weights_.size());
  grad.bias.assign(dim(), 0.0);

  Matrix dx = upstream;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!c.inside[i]) dx.values()[i] = 0.0;
  for (std::size_t r = 0; r < dx.rows(); ++r)
    for (std::size_t d = 0; d < dx.cols(); ++d) grad.bias[d] += dx(r, d);

  for (std::size_t k = 1; k <= weights_.size(); ++k) {
    Matrix dpre = std::move(dx);
    const auto& pre = c.pre[k - 1].values();
    for (std::size_t i = 0; i < dpre.size(); ++i)
      if (pre[i] <= 0.0) dpre.values()[i] = 0.0;
    grad.weights[k - 1] = kernels::gemm_tn(c.aggregated[k - 1], dpre);
    if (k < weights_.size()) dx = kernels::spmm(c.transposed[k - 1], kernels::gemm_nt(dpre, weights_[k - 1]));
  }
  return grad;
}

ReverseConvGenerator init_generator(std::size_t depth, std::size_t dim, std::uint64_t seed) {
  if (depth < 1 || dim < 1) throw ValidationError("init_generator: depth and dimension must be >= 1");
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(dim)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<Matrix> weights;
  for (std::size_t k = 0; k < depth; ++k) {
    Matrix w(dim, dim);
    for (double& v : w.values()) v = dist(rng);
    weights.push_back(std::move(w));
  }
  return ReverseConvGenerator(std::move(weights), std::vector<double>(dim, 0.0), seed);
}

Matrix synthesize(ReverseConvGenerator& gen, const SampledNeighborhood& nb, const AttributedGraph& g) {
  return gen.synthesize(nb, g);
}

GeneratorGradient generator_gradient(const ReverseConvGenerator& gen, const Matrix& upstream) {
  return gen.gradient(upstream);
}

nlohmann::json to_json(const ReverseConvGenerator& gen) {
  nlohmann::json weights = nlohmann::json::array();
  for (const Matrix& w : gen.weights()) weights.push_back(w.values());
  return {{"depth", gen.depth()}, {"dim", gen.dim()}, {"weights", weights}, {"bias", gen.bias()}, {"seed", gen.seed()}};
}

ReverseConvGenerator generator_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    std::vector<Matrix> weights;
    for (const auto& w : j.at("weights")) {
      Matrix m(dim, dim);
      auto values = w.get<std::vector<double>>();
      if (values.size() != m.size()) throw DimensionError("generator checkpoint: weight array has wrong length");
      m.values() = std::move(values);
      weights.push_back(std::move(m));
    }
    if (weights.size() != j.at("depth").get<std::size_t>()) throw DimensionError("generator checkpoint: depth mismatch");
    return ReverseConvGenerator(std::move(weights), j.at("bias").get<std::vector<double>>(), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("generator checkpoint: ") + e.what());
  }
}

}  // namespace segia
