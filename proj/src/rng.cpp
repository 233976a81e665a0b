#include "rrauq/rng.hpp"

#include <cmath>
#include <numbers>

#include "rrauq/errors.hpp"

namespace rrauq {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(bits >> 11) * kTwoPow53Inv;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngStream RngStream::fork(std::uint64_t index) const {
  return RngStream(seed_, mix64(mix64(stream_id_) ^ mix64(index + 0x632BE59BD9B4E019ull)));
}

RngStream RngStream::fork(std::string_view name) const {
  // FNV-1a, then folded through the index path.
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return fork(h);
}

std::array<std::uint32_t, 4> RngStream::next_block() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
      static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  ++counter_;
  return philox4x32_10(ctr, key);
}

std::uint64_t RngStream::next_u64() {
  const auto block = next_block();
  return (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
}

double RngStream::next_double() {
  const auto block = next_block();
  return to_unit(block[0], block[1]);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) throw ParameterError("next_below: bound must be positive");
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

double RngStream::bernoulli(double prob) {
  return next_double() < prob ? 1.0 : 0.0;
}

double RngStream::normal(double mu, double sigma) {
  const auto block = next_block();
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - to_unit(block[0], block[1]);
  const double u2 = to_unit(block[2], block[3]);
  return mu + sigma * std::sqrt(-2.0 * std::log(u1)) *
                  std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::poisson(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("poisson: lambda must be finite and non-negative");
  }
  if (lambda == 0.0) return 0;
  if (lambda < 30.0) {
    // Knuth's multiplicative method.
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double prod = next_double();
    while (prod > limit) {
      ++k;
      prod *= next_double();
    }
    return k;
  }
  // Hormann's PTRS transformed rejection.
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = next_double() - 0.5;
    const double v = next_double();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -lambda + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

Tensor rng_draw(RngStream& stream, const Distribution& dist, const Shape& shape) {
  switch (dist.kind) {
    case Distribution::Kind::uniform:
      if (!(dist.a < dist.b)) {
        throw ParameterError("uniform: require lo < hi, got lo=" + std::to_string(dist.a) +
                             " hi=" + std::to_string(dist.b));
      }
      break;
    case Distribution::Kind::bernoulli:
      if (!(dist.a >= 0.0 && dist.a <= 1.0)) {
        throw ParameterError("bernoulli: probability must lie in [0,1], got " +
                             std::to_string(dist.a));
      }
      break;
    case Distribution::Kind::normal:
      if (!(dist.b >= 0.0)) {
        throw ParameterError("normal: sigma must be non-negative, got " +
                             std::to_string(dist.b));
      }
      break;
  }
  Tensor out(shape);
  for (auto& v : out.data()) {
    switch (dist.kind) {
      case Distribution::Kind::uniform: v = stream.uniform(dist.a, dist.b); break;
      case Distribution::Kind::bernoulli: v = stream.bernoulli(dist.a); break;
      case Distribution::Kind::normal: v = stream.normal(dist.a, dist.b); break;
    }
  }
  return out;
}

}  // namespace rrauq
