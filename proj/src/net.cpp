#include "rrauq/net.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "rrauq/errors.hpp"

namespace rrauq {

namespace {

std::atomic<std::uint64_t> next_graph_id{1};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string default_name(const LayerKind& kind, std::size_t index) {
  const char* base = std::visit(overloaded{[](const DenseLayer&) { return "dense"; },
                                           [](const Conv2dLayer&) { return "conv"; },
                                           [](const FlattenLayer&) { return "flatten"; },
                                           [](const ActivationLayer&) { return "act"; },
                                           [](const DropoutLayer&) { return "dropout"; }},
                                kind);
  return base + std::to_string(index);
}

std::size_t conv_pad(const Conv2dLayer& c) {
  return c.padding == Padding::same ? (c.kernel - 1) / 2 : 0;
}

std::size_t conv_extent(std::size_t in, const Conv2dLayer& c) {
  const std::size_t padded = in + 2 * conv_pad(c);
  if (padded < c.kernel) return 0;
  return (padded - c.kernel) / c.stride + 1;
}

Shape batch_shape(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace

NetworkGraph::NetworkGraph(Shape input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), id_(next_graph_id++) {
  if (input_shape_.empty()) throw DimensionError("network input shape must be non-empty");
  Shape current = input_shape_;
  shapes_.push_back(current);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& layer = layers_[i];
    if (layer.name.empty()) layer.name = default_name(layer.kind, i);
    auto fail = [&](const std::string& why) {
      throw DimensionError("layer '" + layer.name + "': " + why + " (input " +
                           shape_to_string(current) + ")");
    };
    std::optional<std::size_t> pidx;
    std::visit(
        overloaded{
            [&](const DenseLayer& d) {
              if (current.size() != 1 || current[0] != d.in || d.out == 0)
                fail("dense expects a vector of " + std::to_string(d.in));
              params_.push_back({layer.name, Tensor({d.out, d.in + 1})});
              pidx = params_.size() - 1;
              current = {d.out};
            },
            [&](const Conv2dLayer& c) {
              if (c.kernel == 0 || c.stride == 0 || c.out_channels == 0)
                fail("conv2d parameters must be positive");
              if (current.size() != 3 || current[0] != c.in_channels)
                fail("conv2d expects " + std::to_string(c.in_channels) + " channels");
              const std::size_t h = conv_extent(current[1], c);
              const std::size_t w = conv_extent(current[2], c);
              if (h == 0 || w == 0) fail("kernel larger than padded input");
              params_.push_back(
                  {layer.name,
                   Tensor({c.out_channels, c.in_channels * c.kernel * c.kernel + 1})});
              pidx = params_.size() - 1;
              current = {c.out_channels, h, w};
            },
            [&](const FlattenLayer&) { current = {shape_size(current)}; },
            [&](const ActivationLayer& a) { a.kind.validate(); },
            [&](const DropoutLayer& d) { DropoutSpec{d.rate}.validate(); }},
        layer.kind);
    layer_param_.push_back(pidx);
    shapes_.push_back(current);
  }
  for (std::size_t i = 0; i < params_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (params_[i].name == params_[j].name)
        throw ContractError("duplicate parameter name '" + params_[i].name + "'");
}

Tensor& NetworkGraph::param_value(std::size_t index) {
  ++revision_;
  return params_.at(index).value;
}

const Parameter* NetworkGraph::find_param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::optional<std::size_t> NetworkGraph::param_index(std::size_t layer) const {
  return layer_param_.at(layer);
}

std::size_t NetworkGraph::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

bool NetworkGraph::has_stochastic_layers() const {
  for (const auto& layer : layers_) {
    if (const auto* a = std::get_if<ActivationLayer>(&layer.kind); a && a->kind.stochastic())
      return true;
    if (const auto* d = std::get_if<DropoutLayer>(&layer.kind); d && d->rate > 0.0) return true;
  }
  return false;
}

void NetworkGraph::initialize(const RngStream& rng) {
  ++revision_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!layer_param_[i]) continue;
    Tensor& w = params_[*layer_param_[i]].value;
    const std::size_t rows = w.dim(0), cols = w.dim(1);
    const std::size_t fan_in = cols - 1;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    RngStream stream = rng.fork(i);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c + 1 < cols; ++c) w.at(r, c) = stream.uniform(-bound, bound);
      w.at(r, cols - 1) = 0.0;
    }
  }
}

namespace {

Tensor dense_forward(const Tensor& x, const Tensor& w) {
  const std::size_t batch = x.dim(0), in = x.size() / batch, out = w.dim(0);
  Tensor y({batch, out});
  auto xs = x.data();
  auto ws = w.data();
  auto ys = y.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = xs.data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = ws.data() + o * (in + 1);
      double acc = wo[in];
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xb[i];
      ys[b * out + o] = acc;
    }
  }
  return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor& gw,
                    Tensor& gx) {
  const std::size_t batch = x.dim(0), in = x.size() / batch, out = w.dim(0);
  gw = Tensor(w.shape());
  gx = Tensor(x.shape());
  auto xs = x.data();
  auto ws = w.data();
  auto gys = gy.data();
  auto gws = gw.data();
  auto gxs = gx.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = xs.data() + b * in;
    double* gxb = gxs.data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = gys[b * out + o];
      if (g == 0.0) continue;
      double* gwo = gws.data() + o * (in + 1);
      const double* wo = ws.data() + o * (in + 1);
      for (std::size_t i = 0; i < in; ++i) {
        gwo[i] += g * xb[i];
        gxb[i] += g * wo[i];
      }
      gwo[in] += g;
    }
  }
}

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, ho, wo, k, stride, pad;
};

ConvGeometry conv_geometry(const Tensor& x, const Conv2dLayer& c) {
  return {x.dim(0),
          x.dim(1),
          x.dim(2),
          x.dim(3),
          c.out_channels,
          conv_extent(x.dim(2), c),
          conv_extent(x.dim(3), c),
          c.kernel,
          c.stride,
          conv_pad(c)};
}

Tensor conv_forward(const Tensor& x, const Tensor& w, const Conv2dLayer& c) {
  const auto g = conv_geometry(x, c);
  const std::size_t row = g.cin * g.k * g.k + 1;
  Tensor y({g.batch, g.cout, g.ho, g.wo});
  auto xs = x.data();
  auto ws = w.data();
  auto ys = y.data();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t o = 0; o < g.cout; ++o) {
      const double* wo = ws.data() + o * row;
      for (std::size_t i = 0; i < g.ho; ++i)
        for (std::size_t j = 0; j < g.wo; ++j) {
          double acc = wo[row - 1];
          for (std::size_t ch = 0; ch < g.cin; ++ch)
            for (std::size_t u = 0; u < g.k; ++u) {
              const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(i * g.stride + u) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(g.h)) continue;
              for (std::size_t v = 0; v < g.k; ++v) {
                const std::ptrdiff_t xj = static_cast<std::ptrdiff_t>(j * g.stride + v) -
                                          static_cast<std::ptrdiff_t>(g.pad);
                if (xj < 0 || xj >= static_cast<std::ptrdiff_t>(g.w)) continue;
                acc += wo[(ch * g.k + u) * g.k + v] *
                       xs[((b * g.cin + ch) * g.h + yi) * g.w + xj];
              }
            }
          ys[((b * g.cout + o) * g.ho + i) * g.wo + j] = acc;
        }
    }
  return y;
}

void conv_backward(const Tensor& x, const Tensor& w, const Conv2dLayer& c, const Tensor& gy,
                   Tensor& gw, Tensor& gx) {
  const auto g = conv_geometry(x, c);
  const std::size_t row = g.cin * g.k * g.k + 1;
  gw = Tensor(w.shape());
  gx = Tensor(x.shape());
  auto xs = x.data();
  auto ws = w.data();
  auto gys = gy.data();
  auto gws = gw.data();
  auto gxs = gx.data();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t o = 0; o < g.cout; ++o) {
      const double* wo = ws.data() + o * row;
      double* gwo = gws.data() + o * row;
      for (std::size_t i = 0; i < g.ho; ++i)
        for (std::size_t j = 0; j < g.wo; ++j) {
          const double grad = gys[((b * g.cout + o) * g.ho + i) * g.wo + j];
          if (grad == 0.0) continue;
          gwo[row - 1] += grad;
          for (std::size_t ch = 0; ch < g.cin; ++ch)
            for (std::size_t u = 0; u < g.k; ++u) {
              const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(i * g.stride + u) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(g.h)) continue;
              for (std::size_t v = 0; v < g.k; ++v) {
                const std::ptrdiff_t xj = static_cast<std::ptrdiff_t>(j * g.stride + v) -
                                          static_cast<std::ptrdiff_t>(g.pad);
                if (xj < 0 || xj >= static_cast<std::ptrdiff_t>(g.w)) continue;
                const std::size_t xi = ((b * g.cin + ch) * g.h + yi) * g.w + xj;
                const std::size_t wi = (ch * g.k + u) * g.k + v;
                gwo[wi] += grad * xs[xi];
                gxs[xi] += grad * wo[wi];
              }
            }
        }
    }
}

ForwardResult run_forward(const NetworkGraph& net, const Tensor& x, ForwardMode mode,
                          const RngStream* rng,
                          const std::vector<std::optional<Tensor>>* replay, bool record,
                          bool check_finite = true) {
  const auto& layers = net.layers();
  if (x.rank() != net.input_shape().size() + 1 ||
      !std::equal(net.input_shape().begin(), net.input_shape().end(), x.shape().begin() + 1)) {
    throw DimensionError("network input expects samples of " +
                         shape_to_string(net.input_shape()) + ", got batch " +
                         shape_to_string(x.shape()));
  }
  if (replay && replay->size() != layers.size()) {
    throw ContractError("replay masks do not match the network's layer count");
  }
  const std::size_t batch = x.dim(0);
  ForwardResult result;
  result.trace.graph_id = net.id();
  result.trace.revision = net.revision();
  result.trace.masks.resize(layers.size());
  if (record) result.trace.inputs.reserve(layers.size());

  Tensor current = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (record) result.trace.inputs.push_back(current);
    auto replayed = [&]() -> const Tensor& {
      const auto& m = (*replay)[i];
      if (!m || m->shape() != current.shape()) {
        throw ContractError("layer '" + layer.name + "': replay mask missing or mis-shaped");
      }
      return *m;
    };
    auto layer_stream = [&]() { return rng->fork(i); };
    std::visit(
        overloaded{
            [&](const DenseLayer&) {
              current = dense_forward(current, net.params()[*net.param_index(i)].value);
            },
            [&](const Conv2dLayer& c) {
              current = conv_forward(current, net.params()[*net.param_index(i)].value, c);
            },
            [&](const FlattenLayer&) {
              current = current.reshaped({batch, current.size() / batch});
            },
            [&](const ActivationLayer& a) {
              SampledMask mask;
              if (replay) {
                mask.slopes = replayed();
              } else if (a.kind.stochastic() && mode != ForwardMode::deterministic) {
                RngStream stream = layer_stream();
                mask = sample_mask(a.kind, current.shape(), stream);
              } else {
                mask = deterministic_mask(a.kind, current.shape());
              }
              current = activate(current, mask);
              if (record) result.trace.masks[i] = std::move(mask.slopes);
            },
            [&](const DropoutLayer& d) {
              if (replay) {
                const Tensor& mask = replayed();
                current = elementwise(BinaryOp::mul, current, mask);
                result.trace.masks[i] = mask;
                return;
              }
              const bool sample = mode == ForwardMode::train || mode == ForwardMode::mc_eval;
              RngStream stream = layer_stream();
              auto out = dropout_forward(current, DropoutSpec{d.rate},
                                         sample ? DropoutMode::sample : DropoutMode::deterministic,
                                         stream);
              current = std::move(out.y);
              if (record) result.trace.masks[i] = std::move(out.keep_mask);
            }},
        layer.kind);
  }
  if (check_finite && !current.all_finite()) {
    throw ContractError("forward produced non-finite logits");
  }
  result.logits = std::move(current);
  return result;
}

}  // namespace

ForwardResult forward(const NetworkGraph& net, const Tensor& x, ForwardMode mode,
                      const RngStream& rng, bool record) {
  return run_forward(net, x, mode, &rng, nullptr, record);
}

ForwardResult replay_forward(const NetworkGraph& net, const Tensor& x,
                             const std::vector<std::optional<Tensor>>& masks) {
  return run_forward(net, x, ForwardMode::train, nullptr, &masks, true);
}

Gradients backward(const NetworkGraph& net, const Trace& trace, const Tensor& grad_logits) {
  const auto& layers = net.layers();
  if (trace.graph_id != net.id() || trace.revision != net.revision()) {
    throw ContractError("stale trace: parameters changed since the forward pass");
  }
  if (trace.inputs.size() != layers.size() || trace.masks.size() != layers.size()) {
    throw ContractError("trace was not recorded for this network");
  }
  Gradients grads;
  grads.params.reserve(net.params().size());
  for (const auto& p : net.params()) grads.params.emplace_back(p.value.shape());

  const std::size_t batch = trace.inputs.empty() ? grad_logits.dim(0) : trace.inputs[0].dim(0);
  const Shape expected = batch_shape(batch, net.output_shape());
  if (grad_logits.shape() != expected) {
    throw DimensionError("grad_logits " + shape_to_string(grad_logits.shape()) +
                         " does not match logits " + shape_to_string(expected));
  }

  Tensor upstream = grad_logits;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const Tensor& input = trace.inputs[li];
    std::visit(overloaded{[&](const DenseLayer&) {
                            const std::size_t pi = *net.param_index(li);
                            Tensor gx;
                            dense_backward(input, net.params()[pi].value, upstream,
                                           grads.params[pi], gx);
                            upstream = std::move(gx);
                          },
                          [&](const Conv2dLayer& c) {
                            const std::size_t pi = *net.param_index(li);
                            Tensor gx;
                            conv_backward(input, net.params()[pi].value, c, upstream,
                                          grads.params[pi], gx);
                            upstream = std::move(gx);
                          },
                          [&](const FlattenLayer&) { upstream = upstream.reshaped(input.shape()); },
                          [&](const ActivationLayer&) {
                            upstream = activate_backward(input, SampledMask{*trace.masks[li]},
                                                         upstream);
                          },
                          [&](const DropoutLayer&) {
                            upstream = dropout_backward(upstream, *trace.masks[li]);
                          }},
               layer.kind);
  }
  grads.input = std::move(upstream);
  return grads;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross-entropy: logits " + shape_to_string(logits.shape()) +
                         " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  LossResult result{0.0, Tensor({batch, classes})};
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ContractError("label " + std::to_string(label) + " outside [0," +
                          std::to_string(classes) + ")");
    }
    double top = logits.at(b, 0);
    for (std::size_t c = 1; c < classes; ++c) top = std::max(top, logits.at(b, c));
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(logits.at(b, c) - top);
    const double log_norm = top + std::log(total);
    result.loss += log_norm - logits.at(b, static_cast<std::size_t>(label));
    for (std::size_t c = 0; c < classes; ++c) {
      const double prob = std::exp(logits.at(b, c) - log_norm);
      result.grad_logits.at(b, c) =
          (prob - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) /
          static_cast<double>(batch);
    }
  }
  result.loss /= static_cast<double>(batch);
  return result;
}

double scheduled_lr(const OptimizerState& opt, std::size_t epoch, std::size_t total_epochs) {
  double lr = opt.learning_rate;
  for (const auto& step : opt.schedule) {
    const auto boundary =
        static_cast<std::size_t>(std::ceil(step.fraction * static_cast<double>(total_epochs)));
    if (epoch >= boundary) lr /= step.divisor;
  }
  return lr;
}

void sgd_step(NetworkGraph& net, const Gradients& grads, OptimizerState& opt, double lr) {
  const auto params = net.params();
  if (grads.params.size() != params.size()) {
    throw DimensionError("gradient count does not match parameter count");
  }
  if (opt.velocity.empty()) {
    for (const auto& p : params) opt.velocity.emplace_back(p.value.shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.params[i].shape() != params[i].value.shape() ||
        opt.velocity[i].shape() != params[i].value.shape()) {
      throw DimensionError("parameter '" + params[i].name + "': gradient or velocity shape " +
                           "does not match " + shape_to_string(params[i].value.shape()));
    }
    Tensor& w = net.param_value(i);
    auto ws = w.data();
    auto gs = grads.params[i].data();
    auto vs = opt.velocity[i].data();
    for (std::size_t k = 0; k < ws.size(); ++k) {
      const double g = gs[k] + opt.weight_decay * ws[k];
      vs[k] = opt.momentum * vs[k] + g;
      ws[k] -= lr * (opt.nesterov ? g + opt.momentum * vs[k] : vs[k]);
    }
  }
}

TrainResult train(NetworkGraph& net, const Dataset& data, OptimizerState& opt,
                  const TrainOptions& options, const RngStream& rng) {
  if (data.size() == 0) throw ContractError("training set is empty");
  if (options.batch_size == 0 || options.batch_size > data.size()) {
    throw ContractError("batch size must lie in [1, " + std::to_string(data.size()) + "]");
  }
  TrainResult result;
  const RngStream order_root = rng.fork("data-order");
  const RngStream activation_root = rng.fork("activation");
  std::vector<std::size_t> order(data.size());
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle = order_root.fork(epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.next_below(i)]);
    }
    const double lr = scheduled_lr(opt, epoch, options.epochs);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Tensor x = data.features.gather_rows(rows);
      std::vector<int> labels;
      labels.reserve(rows.size());
      for (auto r : rows) labels.push_back(data.labels[r]);

      const RngStream step_rng = activation_root.fork(step++);
      auto fwd = run_forward(net, x, ForwardMode::train, &step_rng, nullptr, true, false);
      auto loss = softmax_cross_entropy(fwd.logits, labels);
      if (!std::isfinite(loss.loss)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                                std::to_string(epoch),
                            epoch);
      }
      loss_sum += loss.loss * static_cast<double>(rows.size());
      sgd_step(net, backward(net, fwd.trace, loss.grad_logits), opt, lr);
    }
    const double epoch_loss = loss_sum / static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch), epoch);
    }
    result.loss_curve.push_back(epoch_loss);
    result.lr_curve.push_back(lr);
  }
  return result;
}

GradCheckReport grad_check(NetworkGraph& net, const Tensor& x, std::span<const int> labels,
                           double tolerance, const RngStream& rng, std::size_t samples,
                           double h) {
  auto fwd = forward(net, x, ForwardMode::train, rng.fork("masks"));
  const auto masks = fwd.trace.masks;
  const auto loss = softmax_cross_entropy(fwd.logits, labels);
  const Gradients grads = backward(net, fwd.trace, loss.grad_logits);

  std::size_t total = net.parameter_count();
  GradCheckReport report;
  if (total == 0) {
    report.passed = true;
    return report;
  }
  RngStream picker = rng.fork("picks");
  auto eval_loss = [&]() { return softmax_cross_entropy(replay_forward(net, x, masks).logits, labels).loss; };
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = picker.next_below(total);
    std::size_t pi = 0;
    while (flat >= net.params()[pi].value.size()) flat -= net.params()[pi++].value.size();
    const double original = net.params()[pi].value[flat];
    net.param_value(pi)[flat] = original + h;
    const double up = eval_loss();
    net.param_value(pi)[flat] = original - h;
    const double down = eval_loss();
    net.param_value(pi)[flat] = original;
    const double numeric = (up - down) / (2.0 * h);
    report.max_relative_error =
        std::max(report.max_relative_error, relative_error(grads.params[pi][flat], numeric));
    ++report.checked;
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

namespace {

constexpr char kCheckpointMagic[8] = {'R', 'R', 'A', 'U', 'Q', 'C', 'K', 'P'};
constexpr std::uint64_t kCheckpointVersion = 1;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  bool done() const { return pos_ == bytes_.size(); }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError("checkpoint truncated at offset " + std::to_string(pos_));
    }
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter> params) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u64(out, kCheckpointVersion);
  for (const auto& p : params) {
    put_u64(out, p.name.size());
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u64(out, p.value.rank());
    for (auto d : p.value.shape()) put_u64(out, d);
    for (double v : p.value.data()) put_f64(out, v);
  }
  return out;
}

std::vector<Parameter> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes);
  if (in.str(8) != std::string(kCheckpointMagic, 8)) {
    throw FormatError("checkpoint: bad magic at offset 0");
  }
  if (const auto version = in.u64(); version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::vector<Parameter> params;
  while (!in.done()) {
    Parameter p;
    const auto name_len = in.u64();
    if (name_len > bytes.size()) throw FormatError("checkpoint: implausible name length");
    p.name = in.str(name_len);
    const auto rank = in.u64();
    if (rank == 0 || rank > 8) throw FormatError("checkpoint: invalid rank for '" + p.name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = in.u64();
    const std::size_t count = shape_size(shape);
    if (count > bytes.size() / 8) throw FormatError("checkpoint: implausible tensor size");
    std::vector<double> data(count);
    for (auto& v : data) v = in.f64();
    p.value = Tensor(std::move(shape), std::move(data));
    params.push_back(std::move(p));
  }
  return params;
}

void assign_params(NetworkGraph& net, const std::vector<Parameter>& params) {
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const auto& target = net.params()[i];
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const Parameter& p) { return p.name == target.name; });
    if (it == params.end()) {
      throw ContractError("checkpoint lacks parameter '" + target.name + "'");
    }
    if (it->value.shape() != target.value.shape()) {
      throw DimensionError("checkpoint parameter '" + target.name + "' has shape " +
                           shape_to_string(it->value.shape()) + ", network expects " +
                           shape_to_string(target.value.shape()));
    }
    net.param_value(i) = it->value;
  }
}

void save_checkpoint(const NetworkGraph& net, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(net.params()));
}

void load_checkpoint(NetworkGraph& net, const std::filesystem::path& path) {
  assign_params(net, decode_checkpoint(read_file_bytes(path)));
}

}  // namespace rrauq
