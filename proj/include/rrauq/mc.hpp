#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rrauq/net.hpp"

namespace rrauq {

/// Class probabilities from N stochastic passes (or N ensemble members),
/// stored as [N x n x C].
struct PredictiveSet {
  Tensor probs;
  std::vector<std::uint64_t> pass_seeds;  // stream id of each pass
  std::vector<std::string> warnings;

  std::size_t passes() const { return probs.dim(0); }
  std::size_t samples() const { return probs.dim(1); }
  std::size_t classes() const { return probs.dim(2); }
  /// Probabilities of one pass as [n x C].
  Tensor pass(std::size_t index) const;
  /// Predicted labels of one pass (argmax, ties to the lowest class).
  std::vector<int> pass_labels(std::size_t index) const;
  /// First `count` passes.
  PredictiveSet head(std::size_t count) const;

  /// Throws ContractError unless every row is a probability vector (within 1e-9).
  void validate() const;
};

struct PredictionSummary {
  Tensor mean_probs;                   // [n x C]
  std::vector<int> predicted_label;    // argmax of mean_probs
  std::vector<double> confidence;      // max of mean_probs
  std::vector<double> entropy;         // of mean_probs, nats
  std::vector<double> expected_entropy;  // mean of per-pass entropies
  std::vector<double> mean_variance;   // class-averaged variance across passes
};

/// Pass i runs in mc_eval mode on rng.fork(i). Samples are processed in
/// fixed-size chunks so the result does not depend on `threads`.
PredictiveSet mc_predict(const NetworkGraph& net, const Tensor& x, std::size_t passes,
                         const RngStream& rng, std::size_t threads = 1);

/// One pass with every stochastic layer fixed.
PredictiveSet deterministic_predict(const NetworkGraph& net, const Tensor& x);

/// Deterministic prediction of every member stacked as passes. Members must
/// share the head dimension.
PredictiveSet ensemble_predict(std::span<const NetworkGraph> nets, const Tensor& x,
                               std::size_t threads = 1);

/// Reductions over passes sort each column first, so the summary is
/// bit-identical under any permutation of the passes.
PredictionSummary aggregate(const PredictiveSet& ps);

double entropy_nats(std::span<const double> probs);

std::vector<std::uint8_t> encode_predictive_set(const PredictiveSet& ps);
PredictiveSet decode_predictive_set(const std::vector<std::uint8_t>& bytes);
/// Columns pass,sample,class,prob.
std::string predictive_set_to_csv(const PredictiveSet& ps);
PredictiveSet predictive_set_from_csv(const std::string& csv);

/// Runs `count` independent jobs on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& job);

}  // namespace rrauq
