#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rrauq/activations.hpp"
#include "rrauq/data.hpp"
#include "rrauq/rng.hpp"
#include "rrauq/tensor.hpp"

namespace rrauq {

enum class Padding { valid, same };

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
};

/// Square-kernel 2-D convolution over [C x H x W] samples. "same" pads by
/// (kernel - 1) / 2 on each side.
struct Conv2dLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  Padding padding = Padding::same;
};

struct FlattenLayer {};

struct ActivationLayer {
  ActivationKind kind;
};

struct DropoutLayer {
  double rate = 0.0;
};

using LayerKind =
    std::variant<DenseLayer, Conv2dLayer, FlattenLayer, ActivationLayer, DropoutLayer>;

struct LayerSpec {
  LayerKind kind;
  std::string name;  // generated from kind and position when empty
};

/// A trainable layer's weights with the bias folded in as the last column:
/// dense is [out x (in + 1)], conv2d is [out_ch x (in_ch * k * k + 1)].
struct Parameter {
  std::string name;
  Tensor value;
};

class NetworkGraph {
 public:
  /// Validates that consecutive layer shapes are compatible for samples of
  /// `input_shape`; throws DimensionError naming the first offending layer.
  NetworkGraph(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  /// Per-sample shape entering layer i; index layers().size() is the output.
  const Shape& shape_before(std::size_t layer) const { return shapes_.at(layer); }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }

  std::span<const Parameter> params() const noexcept { return params_; }
  /// Mutable access; invalidates outstanding traces.
  Tensor& param_value(std::size_t index);
  const Parameter* find_param(const std::string& name) const;
  /// Parameter index owned by a layer, if it is trainable.
  std::optional<std::size_t> param_index(std::size_t layer) const;

  std::size_t parameter_count() const;
  bool has_stochastic_layers() const;

  /// Kaiming-uniform on fan-in for weights, zero biases. Layer i draws from
  /// rng.fork(i).
  void initialize(const RngStream& rng);

  std::uint64_t id() const noexcept { return id_; }
  std::uint64_t revision() const noexcept { return revision_; }

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<Parameter> params_;
  std::vector<std::optional<std::size_t>> layer_param_;
  std::uint64_t id_;
  std::uint64_t revision_ = 0;
};

/// train and mc_eval sample both stochastic activations and dropout. eval
/// keeps sampling stochastic activations but turns dropout off.
/// deterministic replaces every stochastic layer by its fixed counterpart.
enum class ForwardMode { train, eval, mc_eval, deterministic };

/// Everything needed to replay a pass and differentiate it.
struct Trace {
  std::uint64_t graph_id = 0;
  std::uint64_t revision = 0;
  std::vector<Tensor> inputs;               // input to each layer
  std::vector<std::optional<Tensor>> masks;  // activation slopes or dropout multipliers
};

struct ForwardResult {
  Tensor logits;
  Trace trace;
};

/// x is [batch x input_shape...]. Layer i draws from rng.fork(i). With
/// `record` false no trace is kept.
ForwardResult forward(const NetworkGraph& net, const Tensor& x, ForwardMode mode,
                      const RngStream& rng, bool record = true);

/// Re-runs a pass with the masks of an earlier trace.
ForwardResult replay_forward(const NetworkGraph& net, const Tensor& x,
                             const std::vector<std::optional<Tensor>>& masks);

struct Gradients {
  std::vector<Tensor> params;  // aligned with NetworkGraph::params()
  Tensor input;
};

/// Throws ContractError when the trace does not belong to the current
/// parameters of `net` or lacks recorded inputs.
Gradients backward(const NetworkGraph& net, const Trace& trace, const Tensor& grad_logits);

struct LossResult {
  double loss = 0.0;   // mean over the batch
  Tensor grad_logits;  // d loss / d logits
};

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

struct LrStep {
  double fraction;
  double divisor;
};

struct OptimizerState {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = true;
  std::vector<LrStep> schedule = {{0.45, 10.0}, {0.675, 10.0}, {0.90, 10.0}};
  std::vector<Tensor> velocity;
};

/// Base rate divided by every step whose epoch ceil(fraction * total) has
/// been reached.
double scheduled_lr(const OptimizerState& opt, std::size_t epoch, std::size_t total_epochs);

/// g = grad + wd * param; v = mu * v + g; param -= lr * (g + mu * v) with
/// Nesterov, lr * v without.
void sgd_step(NetworkGraph& net, const Gradients& grads, OptimizerState& opt, double lr);

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean cross-entropy per epoch
  std::vector<double> lr_curve;
};

/// Minibatch SGD. Epoch e shuffles with rng.fork("data-order").fork(e);
/// step s samples masks from rng.fork("activation").fork(s).
TrainResult train(NetworkGraph& net, const Dataset& data, OptimizerState& opt,
                  const TrainOptions& options, const RngStream& rng);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Central differences (step h) on `samples` randomly chosen parameters,
/// with every stochastic mask frozen to one sampled train-mode pass.
GradCheckReport grad_check(NetworkGraph& net, const Tensor& x, std::span<const int> labels,
                           double tolerance, const RngStream& rng, std::size_t samples = 20,
                           double h = 1e-5);

inline double relative_error(double analytic, double numeric) {
  const double denom = std::abs(analytic) + std::abs(numeric);
  return std::abs(analytic - numeric) / (denom > 1e-8 ? denom : 1e-8);
}

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter> params);
std::vector<Parameter> decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const NetworkGraph& net, const std::filesystem::path& path);
/// Loads parameters by name; every network parameter must be present with
/// a matching shape.
void load_checkpoint(NetworkGraph& net, const std::filesystem::path& path);
void assign_params(NetworkGraph& net, const std::vector<Parameter>& params);

}  // namespace rrauq
