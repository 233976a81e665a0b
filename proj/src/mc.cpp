#include "rrauq/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "rrauq/errors.hpp"

namespace rrauq {

namespace {

constexpr std::size_t kChunk = 512;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  if (bytes.size() - pos < 8) {
    throw FormatError("predictive set truncated at offset " + std::to_string(pos));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
  pos += 8;
  return v;
}

constexpr char kMagic[8] = {'R', 'R', 'A', 'U', 'Q', 'P', 'S', 'T'};
constexpr std::uint64_t kVersion = 1;

/// Softmax of every chunk of `x`, written into pass `slot` of `probs`.
template <class Fn>
void predict_chunks(const Tensor& x, Tensor& probs, std::size_t slot, Fn&& logits_of) {
  const std::size_t n = x.dim(0);
  const std::size_t classes = probs.dim(2);
  auto out = probs.data();
  for (std::size_t begin = 0, chunk = 0; begin < n; begin += kChunk, ++chunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    const Tensor p = softmax_rows(logits_of(x.slice_rows(begin, end), chunk));
    std::copy(p.data().begin(), p.data().end(),
              out.begin() + static_cast<std::ptrdiff_t>((slot * n + begin) * classes));
  }
}

}  // namespace

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

Tensor PredictiveSet::pass(std::size_t index) const {
  const std::size_t n = samples(), c = classes();
  if (index >= passes()) throw DimensionError("pass index out of range");
  return Tensor({n, c}, std::vector<double>(probs.data().begin() + index * n * c,
                                            probs.data().begin() + (index + 1) * n * c));
}

std::vector<int> PredictiveSet::pass_labels(std::size_t index) const {
  const Tensor p = pass(index);
  const Tensor arg = reduce(p, ReduceKind::argmax, 1);
  std::vector<int> labels(arg.size());
  for (std::size_t i = 0; i < arg.size(); ++i) labels[i] = static_cast<int>(arg[i]);
  return labels;
}

PredictiveSet PredictiveSet::head(std::size_t count) const {
  if (count == 0 || count > passes()) throw ContractError("head: invalid pass count");
  const std::size_t row = samples() * classes();
  PredictiveSet out;
  out.probs = Tensor({count, samples(), classes()},
                     std::vector<double>(probs.data().begin(),
                                         probs.data().begin() + count * row));
  out.pass_seeds.assign(pass_seeds.begin(),
                        pass_seeds.begin() + std::min(count, pass_seeds.size()));
  out.warnings = warnings;
  return out;
}

void PredictiveSet::validate() const {
  if (probs.rank() != 3) throw ContractError("predictive set must be [N x n x C]");
  const std::size_t rows = passes() * samples(), c = classes();
  auto p = probs.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double v = p[r * c + k];
      if (!(v >= 0.0)) throw ContractError("predictive set has a negative or NaN probability");
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
      throw ContractError("predictive set row " + std::to_string(r) + " sums to " +
                          std::to_string(total));
    }
  }
}

PredictiveSet mc_predict(const NetworkGraph& net, const Tensor& x, std::size_t passes,
                         const RngStream& rng, std::size_t threads) {
  if (passes == 0) throw ParameterError("mc_predict needs at least one pass");
  if (net.output_shape().size() != 1) throw ContractError("network head must be a vector");
  PredictiveSet ps;
  ps.probs = Tensor({passes, x.dim(0), net.output_shape()[0]});
  ps.pass_seeds.resize(passes);
  if (!net.has_stochastic_layers()) {
    ps.warnings.push_back("network has no stochastic layers; all passes are identical");
  }
  parallel_for(passes, threads, [&](std::size_t i) {
    const RngStream pass_rng = rng.fork(i);
    ps.pass_seeds[i] = pass_rng.stream_id();
    predict_chunks(x, ps.probs, i, [&](const Tensor& chunk, std::size_t c) {
      return forward(net, chunk, ForwardMode::mc_eval, pass_rng.fork(c), false).logits;
    });
  });
  return ps;
}

PredictiveSet deterministic_predict(const NetworkGraph& net, const Tensor& x) {
  PredictiveSet ps;
  ps.probs = Tensor({1, x.dim(0), net.output_shape().at(0)});
  ps.pass_seeds = {0};
  const RngStream unused;
  predict_chunks(x, ps.probs, 0, [&](const Tensor& chunk, std::size_t) {
    return forward(net, chunk, ForwardMode::deterministic, unused, false).logits;
  });
  return ps;
}

PredictiveSet ensemble_predict(std::span<const NetworkGraph> nets, const Tensor& x,
                               std::size_t threads) {
  if (nets.empty()) throw ContractError("ensemble needs at least one member");
  const Shape head = nets.front().output_shape();
  for (const auto& net : nets) {
    if (net.output_shape() != head) {
      throw ContractError("ensemble members disagree on head shape: " +
                          shape_to_string(head) + " vs " + shape_to_string(net.output_shape()));
    }
  }
  PredictiveSet ps;
  ps.probs = Tensor({nets.size(), x.dim(0), head.at(0)});
  ps.pass_seeds.resize(nets.size());
  const RngStream unused;
  parallel_for(nets.size(), threads, [&](std::size_t m) {
    ps.pass_seeds[m] = m;
    predict_chunks(x, ps.probs, m, [&](const Tensor& chunk, std::size_t) {
      return forward(nets[m], chunk, ForwardMode::deterministic, unused, false).logits;
    });
  });
  return ps;
}

double entropy_nats(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

PredictionSummary aggregate(const PredictiveSet& ps) {
  const std::size_t passes = ps.passes(), n = ps.samples(), c = ps.classes();
  PredictionSummary s;
  s.mean_probs = Tensor({n, c});
  s.predicted_label.resize(n);
  s.confidence.resize(n);
  s.entropy.resize(n);
  s.expected_entropy.resize(n);
  s.mean_variance.resize(n);
  auto p = ps.probs.data();
  std::vector<double> column(passes);
  std::vector<double> pass_entropy(passes);
  for (std::size_t i = 0; i < n; ++i) {
    double variance_total = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t t = 0; t < passes; ++t) column[t] = p[(t * n + i) * c + k];
      std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (double v : column) sum += v;
      const double mean = sum / static_cast<double>(passes);
      double sq = 0.0;
      for (double v : column) sq += (v - mean) * (v - mean);
      s.mean_probs.at(i, k) = mean;
      variance_total += sq / static_cast<double>(passes);
    }
    s.mean_variance[i] = variance_total / static_cast<double>(c);
    const auto row = std::span<const double>(s.mean_probs.data()).subspan(i * c, c);
    s.entropy[i] = entropy_nats(row);
    const auto best = std::max_element(row.begin(), row.end());  // first maximum
    s.predicted_label[i] = static_cast<int>(best - row.begin());
    s.confidence[i] = *best;
    for (std::size_t t = 0; t < passes; ++t)
      pass_entropy[t] = entropy_nats(std::span<const double>(p).subspan((t * n + i) * c, c));
    std::sort(pass_entropy.begin(), pass_entropy.end());
    double h = 0.0;
    for (double v : pass_entropy) h += v;
    s.expected_entropy[i] = h / static_cast<double>(passes);
  }
  return s;
}

std::vector<std::uint8_t> encode_predictive_set(const PredictiveSet& ps) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, kVersion);
  put_u64(out, ps.passes());
  put_u64(out, ps.samples());
  put_u64(out, ps.classes());
  for (double v : ps.probs.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
  }
  return out;
}

PredictiveSet decode_predictive_set(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("predictive set: bad magic at offset 0");
  }
  std::size_t pos = 8;
  if (const auto version = get_u64(bytes, pos); version != kVersion) {
    throw FormatError("predictive set: unsupported version " + std::to_string(version));
  }
  const auto passes = get_u64(bytes, pos);
  const auto n = get_u64(bytes, pos);
  const auto c = get_u64(bytes, pos);
  if (passes == 0 || n == 0 || c == 0) throw FormatError("predictive set: zero dimension");
  const unsigned __int128 expected = static_cast<unsigned __int128>(passes) * n * c * 8;
  if (expected != bytes.size() - pos) {
    throw FormatError("predictive set: payload size does not match header at offset " +
                      std::to_string(pos));
  }
  std::vector<double> data(passes * n * c);
  for (auto& v : data) {
    const std::uint64_t bits = get_u64(bytes, pos);
    std::memcpy(&v, &bits, sizeof v);
  }
  PredictiveSet ps;
  ps.probs = Tensor({passes, n, c}, std::move(data));
  ps.pass_seeds.resize(passes);
  for (std::size_t i = 0; i < passes; ++i) ps.pass_seeds[i] = i;
  return ps;
}

std::string predictive_set_to_csv(const PredictiveSet& ps) {
  std::ostringstream out;
  out << "pass,sample,class,prob\n";
  char buf[40];
  auto p = ps.probs.data();
  const std::size_t n = ps.samples(), c = ps.classes();
  for (std::size_t t = 0; t < ps.passes(); ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", p[(t * n + i) * c + k]);
        out << t << ',' << i << ',' << k << ',' << buf << '\n';
      }
  return out.str();
}

PredictiveSet predictive_set_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "pass,sample,class,prob") {
    throw FormatError("predictive set csv: missing header");
  }
  struct Entry {
    std::size_t t, i, k;
    double p;
  };
  std::vector<Entry> entries;
  std::size_t passes = 0, n = 0, c = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Entry e{};
    if (std::sscanf(line.c_str(), "%zu,%zu,%zu,%lf", &e.t, &e.i, &e.k, &e.p) != 4) {
      throw FormatError("predictive set csv: malformed line " + std::to_string(line_no));
    }
    passes = std::max(passes, e.t + 1);
    n = std::max(n, e.i + 1);
    c = std::max(c, e.k + 1);
    entries.push_back(e);
  }
  if (entries.empty() || entries.size() != passes * n * c) {
    throw FormatError("predictive set csv: incomplete grid");
  }
  PredictiveSet ps;
  ps.probs = Tensor({passes, n, c});
  for (const auto& e : entries) ps.probs[(e.t * n + e.i) * c + e.k] = e.p;
  ps.pass_seeds.resize(passes);
  for (std::size_t i = 0; i < passes; ++i) ps.pass_seeds[i] = i;
  return ps;
}

}  // namespace rrauq
