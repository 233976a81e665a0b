#include "rrauq/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include "rrauq/errors.hpp"

namespace rrauq {

Shape Dataset::sample_shape() const {
  return Shape(features.shape().begin() + 1, features.shape().end());
}

void Dataset::validate() const {
  if (labels.empty()) throw ContractError("dataset '" + name + "' is empty");
  if (features.rank() < 2 || features.dim(0) != labels.size()) {
    throw ContractError("dataset '" + name + "': feature rows do not match label count");
  }
  for (int label : labels) {
    if (label < 0 || label >= class_count) {
      throw ContractError("dataset '" + name + "': label " + std::to_string(label) +
                          " outside [0," + std::to_string(class_count) + ")");
    }
  }
}

Dataset Dataset::subset(std::size_t begin, std::size_t end) const {
  Dataset out;
  out.features = features.slice_rows(begin, end);
  out.labels.assign(labels.begin() + begin, labels.begin() + end);
  out.class_count = class_count;
  out.name = name;
  return out;
}

Dataset gen_two_moons(std::size_t n, double noise_sigma, std::uint64_t seed) {
  if (n < 2) throw ParameterError("two_moons needs n >= 2, got " + std::to_string(n));
  if (!(noise_sigma >= 0.0)) throw ParameterError("two_moons noise must be non-negative");
  const std::size_t outer = (n + 1) / 2;
  const std::size_t inner = n / 2;
  Dataset ds;
  ds.features = Tensor({n, 2});
  ds.labels.resize(n);
  ds.class_count = 2;
  ds.name = "two_moons";
  RngStream noise(seed, 0);
  auto angle = [](std::size_t i, std::size_t count) {
    return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1)
                     : 0.0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    double x, y;
    if (i < outer) {
      const double t = angle(i, outer);
      x = std::cos(t);
      y = std::sin(t);
      ds.labels[i] = 0;
    } else {
      const double t = angle(i - outer, inner);
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
      ds.labels[i] = 1;
    }
    if (noise_sigma > 0.0) {
      x += noise.normal(0.0, noise_sigma);
      y += noise.normal(0.0, noise_sigma);
    }
    ds.features.at(i, 0) = x;
    ds.features.at(i, 1) = y;
  }
  return ds;
}

Dataset gen_blobs(std::size_t n, const std::vector<std::vector<double>>& centers, double sigma,
                  std::uint64_t seed) {
  if (centers.size() < 2) throw ParameterError("blobs needs at least two centers");
  if (!(sigma >= 0.0)) throw ParameterError("blobs sigma must be non-negative");
  if (n == 0) throw ParameterError("blobs needs n >= 1");
  const std::size_t dim = centers.front().size();
  if (dim == 0) throw ParameterError("blob centers must be non-empty");
  for (const auto& c : centers)
    if (c.size() != dim) throw DimensionError("blob centers differ in dimension");

  Dataset ds;
  ds.features = Tensor({n, dim});
  ds.labels.resize(n);
  ds.class_count = static_cast<int>(centers.size());
  const std::set<std::vector<double>> distinct(centers.begin(), centers.end());
  ds.name = distinct.size() == centers.size() ? "blobs" : "blobs(duplicate-centers)";
  RngStream noise(seed, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % centers.size();
    ds.labels[i] = static_cast<int>(k);
    for (std::size_t d = 0; d < dim; ++d) {
      ds.features.at(i, d) = centers[k][d] + (sigma > 0.0 ? noise.normal(0.0, sigma) : 0.0);
    }
  }
  return ds;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& source) {
  if (bytes.size() < offset + 4) {
    throw FormatError(source + ": truncated header at offset " + std::to_string(offset));
  }
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  IdxArray array;
  array.magic = read_be32(bytes, 0, source);
  const std::uint32_t ndims = array.magic & 0xFFu;
  if ((array.magic >> 8) != 0x08u || ndims == 0) {
    std::ostringstream msg;
    msg << source << ": bad IDX magic 0x" << std::hex << array.magic << " at offset 0";
    throw FormatError(msg.str());
  }
  std::size_t count = 1;
  for (std::uint32_t d = 0; d < ndims; ++d) {
    const std::uint32_t size = read_be32(bytes, 4 + 4 * d, source);
    if (size == 0) {
      throw FormatError(source + ": zero dimension at offset " + std::to_string(4 + 4 * d));
    }
    array.dims.push_back(size);
    count *= size;
  }
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(ndims);
  if (bytes.size() != header + count) {
    throw FormatError(source + ": expected " + std::to_string(count) + " data bytes after offset " +
                      std::to_string(header) + ", file has " +
                      std::to_string(bytes.size() > header ? bytes.size() - header : 0));
  }
  array.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return array;
}

std::vector<std::uint8_t> encode_idx(const IdxArray& array) {
  std::vector<std::uint8_t> out;
  write_be32(out, array.magic);
  for (auto d : array.dims) write_be32(out, d);
  out.insert(out.end(), array.values.begin(), array.values.end());
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int class_count) {
  const IdxArray images = parse_idx(read_file_bytes(images_path), images_path.string());
  const IdxArray labels = parse_idx(read_file_bytes(labels_path), labels_path.string());
  if (images.magic != 0x00000803u) {
    throw FormatError(images_path.string() + ": expected image magic 0x00000803 at offset 0");
  }
  if (labels.magic != 0x00000801u) {
    throw FormatError(labels_path.string() + ": expected label magic 0x00000801 at offset 0");
  }
  if (images.dims[0] != labels.dims[0]) {
    throw FormatError("IDX image count " + std::to_string(images.dims[0]) +
                      " does not match label count " + std::to_string(labels.dims[0]));
  }
  const std::size_t n = images.dims[0], rows = images.dims[1], cols = images.dims[2];
  Dataset ds;
  ds.features = Tensor({n, 1, rows, cols});
  auto px = ds.features.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = images.values[i] / 255.0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels.values[i] >= class_count) {
      throw ContractError(labels_path.string() + ": label " + std::to_string(labels.values[i]) +
                          " at index " + std::to_string(i) + " is out of range for " +
                          std::to_string(class_count) + " classes");
    }
    ds.labels[i] = labels.values[i];
  }
  ds.class_count = class_count;
  ds.name = "idx:" + images_path.filename().string();
  return ds;
}

std::pair<Dataset, NormalizationStats> normalize(const Dataset& ds,
                                                 const NormalizationStats* stats) {
  const std::size_t n = ds.features.dim(0);
  const std::size_t d = ds.features.size() / n;
  NormalizationStats used;
  if (stats) {
    if (stats->mean.size() != d || stats->stddev.size() != d) {
      throw ContractError("normalization stats cover " + std::to_string(stats->mean.size()) +
                          " features, dataset has " + std::to_string(d));
    }
    used = *stats;
  } else {
    used.mean.assign(d, 0.0);
    used.stddev.assign(d, 0.0);
    auto x = ds.features.data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) used.mean[j] += x[i * d + j];
    for (auto& m : used.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = x[i * d + j] - used.mean[j];
        used.stddev[j] += c * c;
      }
    for (auto& s : used.stddev) {
      s = std::sqrt(s / static_cast<double>(n));
      if (!(s > 1e-12)) s = 1.0;
    }
  }
  Dataset out = ds;
  auto x = out.features.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x[i * d + j] = (x[i * d + j] - used.mean[j]) / used.stddev[j];
  return {std::move(out), std::move(used)};
}

std::string corruption_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::shot_noise: return "shot_noise";
    case CorruptionKind::pixel_dropout: return "pixel_dropout";
    case CorruptionKind::rotation: return "rotation";
    case CorruptionKind::blur: return "blur";
  }
  return "unknown";
}

CorruptionKind parse_corruption(const std::string& name) {
  for (auto kind : {CorruptionKind::gaussian_noise, CorruptionKind::shot_noise,
                    CorruptionKind::pixel_dropout, CorruptionKind::rotation, CorruptionKind::blur})
    if (corruption_name(kind) == name) return kind;
  throw ConfigError("unknown corruption '" + name + "'");
}

double corruption_level(CorruptionKind kind, int severity) {
  static constexpr std::array<double, 5> gaussian = {0.04, 0.08, 0.12, 0.18, 0.26};
  static constexpr std::array<double, 5> shot = {500, 250, 100, 50, 25};
  static constexpr std::array<double, 5> dropout = {0.02, 0.05, 0.10, 0.17, 0.25};
  static constexpr std::array<double, 5> rotation = {4, 8, 12, 18, 26};
  static constexpr std::array<double, 5> blur = {1, 1, 2, 2, 3};
  if (severity < 1 || severity > 5) {
    throw ParameterError("corruption severity must lie in 1..5, got " + std::to_string(severity));
  }
  const auto s = static_cast<std::size_t>(severity - 1);
  switch (kind) {
    case CorruptionKind::gaussian_noise: return gaussian[s];
    case CorruptionKind::shot_noise: return shot[s];
    case CorruptionKind::pixel_dropout: return dropout[s];
    case CorruptionKind::rotation: return rotation[s];
    case CorruptionKind::blur: return blur[s];
  }
  return 0.0;
}

namespace {

void rotate_image(std::span<double> plane, std::size_t h, std::size_t w, double radians) {
  const std::vector<double> src(plane.begin(), plane.end());
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double c = std::cos(radians), s = std::sin(radians);
  auto pixel = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) ||
        x >= static_cast<std::ptrdiff_t>(w))
      return 0.0;
    return src[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      // Inverse mapping: sample the source at the back-rotated location.
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double sy = cy + c * dy - s * dx;
      const double sx = cx + s * dy + c * dx;
      const double fy = std::floor(sy), fx = std::floor(sx);
      const double ty = sy - fy, tx = sx - fx;
      const auto iy = static_cast<std::ptrdiff_t>(fy), ix = static_cast<std::ptrdiff_t>(fx);
      plane[y * w + x] = (1 - ty) * ((1 - tx) * pixel(iy, ix) + tx * pixel(iy, ix + 1)) +
                         ty * ((1 - tx) * pixel(iy + 1, ix) + tx * pixel(iy + 1, ix + 1));
    }
}

void box_blur(std::span<double> plane, std::size_t h, std::size_t w, std::size_t radius) {
  const std::vector<double> src(plane.begin(), plane.end());
  const auto r = static_cast<std::ptrdiff_t>(radius);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double total = 0.0;
      std::size_t count = 0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) ||
              xx >= static_cast<std::ptrdiff_t>(w))
            continue;
          total += src[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
          ++count;
        }
      plane[y * w + x] = total / static_cast<double>(count);
    }
}

}  // namespace

Dataset corrupt(const Dataset& ds, const CorruptionSpec& spec, std::uint64_t seed) {
  const double level = corruption_level(spec.kind, spec.severity);
  const bool image = ds.is_image();
  if (spec.kind == CorruptionKind::blur && !image) {
    throw UnsupportedError("blur is defined for image data only");
  }
  if (spec.kind == CorruptionKind::rotation && !image && ds.features.dim(1) != 2) {
    throw UnsupportedError("rotation needs 2-D points or images");
  }
  Dataset out = ds;
  out.name = ds.name + "+" + corruption_name(spec.kind) + "@" + std::to_string(spec.severity);
  auto x = out.features.data();
  const std::size_t n = ds.size();
  const std::size_t d = x.size() / n;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo > 0.0 ? *hi_it - lo : 1.0;
  const RngStream root(seed, 0);

  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng = root.fork(i);
    const std::span<double> row = x.subspan(i * d, d);
    switch (spec.kind) {
      case CorruptionKind::gaussian_noise:
        for (auto& v : row) v += rng.normal(0.0, level * range);
        break;
      case CorruptionKind::shot_noise:
        for (auto& v : row) {
          const double unit = std::clamp((v - lo) / range, 0.0, 1.0);
          v = lo + range * static_cast<double>(rng.poisson(unit * level)) / level;
        }
        break;
      case CorruptionKind::pixel_dropout:
        for (auto& v : row)
          if (rng.bernoulli(level) == 1.0) v = 0.0;
        break;
      case CorruptionKind::rotation: {
        const double radians = level * std::numbers::pi / 180.0;
        if (image) {
          const std::size_t h = ds.features.dim(2), w = ds.features.dim(3);
          for (std::size_t c = 0; c < ds.features.dim(1); ++c)
            rotate_image(row.subspan(c * h * w, h * w), h, w, radians);
        } else {
          const double px = row[0], py = row[1];
          row[0] = std::cos(radians) * px - std::sin(radians) * py;
          row[1] = std::sin(radians) * px + std::cos(radians) * py;
        }
        break;
      }
      case CorruptionKind::blur: {
        const std::size_t h = ds.features.dim(2), w = ds.features.dim(3);
        for (std::size_t c = 0; c < ds.features.dim(1); ++c)
          box_blur(row.subspan(c * h * w, h * w), h, w, static_cast<std::size_t>(level));
        break;
      }
    }
    // Corrupted images stay inside the original intensity range.
    if (image) {
      for (auto& v : row) v = std::clamp(v, lo, lo + range);
    }
  }
  return out;
}

std::string dataset_to_csv(const Dataset& ds) {
  std::ostringstream out;
  const std::size_t n = ds.size();
  const std::size_t d = ds.features.size() / n;
  out << "sample";
  for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
  out << ",label\n";
  out.precision(17);
  auto x = ds.features.data();
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (std::size_t j = 0; j < d; ++j) out << ',' << x[i * d + j];
    out << ',' << ds.labels[i] << '\n';
  }
  return out.str();
}

}  // namespace rrauq
