#pragma once

#include <string>

#include "rrauq/rng.hpp"
#include "rrauq/tensor.hpp"

namespace rrauq {

/// Negative-branch behaviour of a rectifier. Every kind computes
/// y = x for x >= 0 and y = a * x for x < 0; the kinds differ in how the
/// per-element slope a is produced.
struct ActivationKind {
  enum class Tag { relu, droprelu, rrelu, identity };

  Tag tag = Tag::relu;
  /// droprelu retention rate: probability that a unit keeps its ReLU
  /// nonlinearity on a given pass.
  double retention = 1.0;
  double lower = 1.0 / 8.0;
  double upper = 1.0 / 3.0;

  static ActivationKind relu() { return {Tag::relu}; }
  static ActivationKind identity() { return {Tag::identity}; }
  static ActivationKind droprelu(double q);
  static ActivationKind rrelu(double lower = 1.0 / 8.0, double upper = 1.0 / 3.0);

  bool stochastic() const noexcept { return tag == Tag::droprelu || tag == Tag::rrelu; }
  /// Throws ParameterError unless 0 <= q <= 1 and 0 <= l < u < 1.
  void validate() const;
  std::string to_string() const;

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;
};

/// One realization of the negative-branch slopes, shaped like the input.
struct SampledMask {
  Tensor slopes;
};

/// Fresh per-element slopes: droprelu gives 1 - Bernoulli(q), rrelu gives
/// Uniform(l, u), relu gives 0 and identity gives 1. Only the stochastic
/// kinds consume randomness.
SampledMask sample_mask(const ActivationKind& kind, const Shape& shape, RngStream& rng);

/// Slopes used when a network is run without sampling: droprelu collapses to
/// ReLU and rrelu to its mean slope (l + u) / 2.
SampledMask deterministic_mask(const ActivationKind& kind, const Shape& shape);

Tensor activate(const Tensor& x, const SampledMask& mask);
/// Local derivative at the realized slopes. x == 0 takes the slope-1 branch.
Tensor activate_backward(const Tensor& x, const SampledMask& mask, const Tensor& upstream);

struct DropoutSpec {
  double p = 0.0;  // drop probability

  void validate() const;
};

enum class DropoutMode {
  sample,        // training or MC evaluation
  deterministic  // y = x
};

struct DropoutResult {
  Tensor y;
  /// Per-element multiplier applied to x: B / (1 - p) when scaled, B when
  /// unscaled, 1 in deterministic mode.
  Tensor keep_mask;
};

/// Inverted dropout when `scaled`, otherwise the plain y = x * B form with
/// B ~ Bernoulli(1 - p). Throws ParameterError for p = 1 with scaling.
DropoutResult dropout_forward(const Tensor& x, const DropoutSpec& spec, DropoutMode mode,
                              RngStream& rng, bool scaled = true);
Tensor dropout_backward(const Tensor& upstream, const Tensor& keep_mask);

}  // namespace rrauq
