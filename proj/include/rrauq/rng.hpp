#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "rrauq/tensor.hpp"

namespace rrauq {

/// Philox4x32-10 block function. Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream. Output k of a stream is the Philox block
/// at counter (k, stream_id) under key seed, so a stream is fully described
/// by (seed, stream_id, counter) and never shares state with another stream.
///
/// A single stream must not be drawn from concurrently; fork instead.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0)
      : seed_(seed), stream_id_(stream_id), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Child stream with its own id derived from (stream_id, index). Does not
  /// advance this stream.
  RngStream fork(std::uint64_t index) const;
  /// Child stream keyed by a name, e.g. "init" or "data-order".
  RngStream fork(std::string_view name) const;

  /// One 128-bit block; advances the counter by one.
  std::array<std::uint32_t, 4> next_block();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double next_double();
  /// Uniform integer on [0, bound).
  std::uint64_t next_below(std::uint64_t bound);
  double uniform(double lo, double hi);
  double bernoulli(double prob);
  /// Box-Muller over the four words of one block; one counter step per draw.
  double normal(double mu, double sigma);
  std::uint64_t poisson(double lambda);

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t counter_ = 0;
};

struct Distribution {
  enum class Kind { uniform, bernoulli, normal } kind;
  double a = 0.0;  // lo, prob or mu
  double b = 0.0;  // hi or sigma

  static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static Distribution bernoulli(double prob) { return {Kind::bernoulli, prob, 0.0}; }
  static Distribution normal(double mu, double sigma) { return {Kind::normal, mu, sigma}; }
};

/// i.i.d. draws of the given shape; advances the stream by exactly
/// shape_size(shape) counter steps. Throws ParameterError on invalid
/// distribution parameters.
Tensor rng_draw(RngStream& stream, const Distribution& dist, const Shape& shape);

/// 64-bit mixing function used for stream derivation.
std::uint64_t mix64(std::uint64_t x);

}  // namespace rrauq
