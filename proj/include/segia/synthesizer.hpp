#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "segia/graph.hpp"
#include "segia/matrix.hpp"
#include "segia/sampler.hpp"

namespace segia {

struct GeneratorGradient {
  std::vector<Matrix> weights;
  std::vector<double> bias;
};

/// Reverse graph convolution over a sampled neighborhood.
///
/// Starting from the clean features of the outermost layer, each step maps
/// layer k onto layer k-1 with X^{k-1} = ReLU(M̃^k X^k W^k). A per-dimension
/// bias is added to X^0 so the output can reach negative feature ranges, and
/// the result is clamped into the clean graph's feature range.
///
/// The forward pass caches its activations; gradient() backpropagates an
/// upstream gradient on the clamped output through the whole composition.
/// One instance is therefore not safe to share between threads.
class ReverseConvGenerator {
 public:
  ReverseConvGenerator() = default;
  ReverseConvGenerator(std::vector<Matrix> weights, std::vector<double> bias, std::uint64_t seed = 0);

  std::size_t depth() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return bias_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }

  /// weights()[k-1] is W^k.
  const std::vector<Matrix>& weights() const noexcept { return weights_; }
  const std::vector<double>& bias() const noexcept { return bias_; }

  /// parameters -= step * grad. Invalidates the forward cache.
  void apply_update(const GeneratorGradient& grad, double step);

  /// Rows follow nb.layers[0].
  Matrix synthesize(const SampledNeighborhood& nb, const AttributedGraph& g);

  /// Layer activations of the last synthesize() call: activations()[k] = X^k.
  const std::vector<Matrix>& activations() const;

  /// Gradient of <upstream, synthesize(...)> with respect to every W^k and the bias.
  GeneratorGradient gradient(const Matrix& upstream) const;

 private:
  struct Cache {
    std::vector<Matrix> activations;  // X^0 .. X^K
    std::vector<Matrix> aggregated;   // M̃^k X^k, index k-1
    std::vector<Matrix> pre;          // M̃^k X^k W^k, index k-1
    std::vector<CsrMatrix> transposed;
    std::vector<char> inside;         // clamp pass-through mask on the output
  };

  std::vector<Matrix> weights_;
  std::vector<double> bias_;
  std::uint64_t seed_ = 0;
  std::optional<Cache> cache_;
};

/// W^k entries uniform in [-sqrt(6/(2D)), +sqrt(6/(2D))], bias zero.
ReverseConvGenerator init_generator(std::size_t depth, std::size_t dim, std::uint64_t seed);

/// Free-function form: returns X^0 for the sampled targets.
Matrix synthesize(ReverseConvGenerator& gen, const SampledNeighborhood& nb, const AttributedGraph& g);
GeneratorGradient generator_gradient(const ReverseConvGenerator& gen, const Matrix& upstream);

nlohmann::json to_json(const ReverseConvGenerator& gen);
ReverseConvGenerator generator_from_json(const nlohmann::json& j);

}  // namespace segia
