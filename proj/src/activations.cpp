#include "rrauq/activations.hpp"

#include <sstream>

#include "rrauq/errors.hpp"

namespace rrauq {

ActivationKind ActivationKind::droprelu(double q) {
  ActivationKind kind{Tag::droprelu};
  kind.retention = q;
  kind.validate();
  return kind;
}

ActivationKind ActivationKind::rrelu(double lower, double upper) {
  ActivationKind kind{Tag::rrelu};
  kind.lower = lower;
  kind.upper = upper;
  kind.validate();
  return kind;
}

void ActivationKind::validate() const {
  if (tag == Tag::droprelu && !(retention >= 0.0 && retention <= 1.0)) {
    throw ParameterError("droprelu retention rate must lie in [0,1], got " +
                         std::to_string(retention));
  }
  if (tag == Tag::rrelu && !(lower >= 0.0 && lower < upper && upper < 1.0)) {
    throw ParameterError("rrelu bounds must satisfy 0 <= l < u < 1, got l=" +
                         std::to_string(lower) + " u=" + std::to_string(upper));
  }
}

std::string ActivationKind::to_string() const {
  std::ostringstream out;
  switch (tag) {
    case Tag::relu: out << "relu"; break;
    case Tag::identity: out << "identity"; break;
    case Tag::droprelu: out << "droprelu(q=" << retention << ")"; break;
    case Tag::rrelu: out << "rrelu(l=" << lower << ",u=" << upper << ")"; break;
  }
  return out.str();
}

SampledMask sample_mask(const ActivationKind& kind, const Shape& shape, RngStream& rng) {
  kind.validate();
  switch (kind.tag) {
    case ActivationKind::Tag::relu: return {Tensor(shape, 0.0)};
    case ActivationKind::Tag::identity: return {Tensor(shape, 1.0)};
    case ActivationKind::Tag::droprelu: {
      // Q = 1 keeps the nonlinearity, i.e. slope 1 - Q = 0.
      Tensor slopes(shape);
      for (auto& v : slopes.data()) v = 1.0 - rng.bernoulli(kind.retention);
      return {std::move(slopes)};
    }
    case ActivationKind::Tag::rrelu:
      return {rng_draw(rng, Distribution::uniform(kind.lower, kind.upper), shape)};
  }
  throw ContractError("unknown activation kind");
}

SampledMask deterministic_mask(const ActivationKind& kind, const Shape& shape) {
  kind.validate();
  switch (kind.tag) {
    case ActivationKind::Tag::relu:
    case ActivationKind::Tag::droprelu: return {Tensor(shape, 0.0)};
    case ActivationKind::Tag::identity: return {Tensor(shape, 1.0)};
    case ActivationKind::Tag::rrelu: return {Tensor(shape, 0.5 * (kind.lower + kind.upper))};
  }
  throw ContractError("unknown activation kind");
}

Tensor activate(const Tensor& x, const SampledMask& mask) {
  if (x.shape() != mask.slopes.shape()) {
    throw DimensionError("activate: input " + shape_to_string(x.shape()) +
                         " vs mask " + shape_to_string(mask.slopes.shape()));
  }
  Tensor y = x;
  auto out = y.data();
  auto slopes = mask.slopes.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] *= slopes[i];
  return y;
}

Tensor activate_backward(const Tensor& x, const SampledMask& mask, const Tensor& upstream) {
  if (x.shape() != mask.slopes.shape() || x.shape() != upstream.shape()) {
    throw DimensionError("activate_backward: shapes " + shape_to_string(x.shape()) + ", " +
                         shape_to_string(mask.slopes.shape()) + ", " +
                         shape_to_string(upstream.shape()));
  }
  Tensor grad = upstream;
  auto g = grad.data();
  auto in = x.data();
  auto slopes = mask.slopes.data();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (in[i] < 0.0) g[i] *= slopes[i];
  return grad;
}

void DropoutSpec::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError("dropout probability must lie in [0,1], got " + std::to_string(p));
  }
}

DropoutResult dropout_forward(const Tensor& x, const DropoutSpec& spec, DropoutMode mode,
                              RngStream& rng, bool scaled) {
  spec.validate();
  if (mode == DropoutMode::deterministic) return {x, Tensor(x.shape(), 1.0)};
  if (scaled && spec.p == 1.0) {
    throw ParameterError("scaled dropout with p = 1 divides by zero");
  }
  const double keep = 1.0 - spec.p;
  const double factor = scaled ? 1.0 / keep : 1.0;
  Tensor mask(x.shape());
  for (auto& v : mask.data()) v = rng.bernoulli(keep) * factor;
  return {elementwise(BinaryOp::mul, x, mask), std::move(mask)};
}

Tensor dropout_backward(const Tensor& upstream, const Tensor& keep_mask) {
  return elementwise(BinaryOp::mul, upstream, keep_mask);
}

}  // namespace rrauq
