#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rrauq/rng.hpp"
#include "rrauq/tensor.hpp"

namespace rrauq {

/// Labelled samples. Features are [n x d] for point data or [n x C x H x W]
/// for images.
struct Dataset {
  Tensor features;
  std::vector<int> labels;
  int class_count = 0;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  Shape sample_shape() const;
  bool is_image() const noexcept { return features.rank() == 4; }
  /// Throws ContractError on label range or count violations.
  void validate() const;
  Dataset subset(std::size_t begin, std::size_t end) const;
};

Dataset gen_two_moons(std::size_t n, double noise_sigma, std::uint64_t seed);

/// Isotropic Gaussian clusters; sample i belongs to center i mod k.
Dataset gen_blobs(std::size_t n, const std::vector<std::vector<double>>& centers,
                  double sigma, std::uint64_t seed);

/// Parses an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0, 1] and stored as [n x 1 x rows x cols].
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int class_count = 10);

/// Raw IDX parsing on byte buffers; `source` names the buffer in errors.
struct IdxArray {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> values;
};
IdxArray parse_idx(const std::vector<std::uint8_t>& bytes, const std::string& source);
std::vector<std::uint8_t> encode_idx(const IdxArray& array);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Per-feature standardization. Computes stats from `ds` unless given;
/// zero-variance features get stddev 1.
std::pair<Dataset, NormalizationStats> normalize(const Dataset& ds,
                                                 const NormalizationStats* stats = nullptr);

enum class CorruptionKind { gaussian_noise, shot_noise, pixel_dropout, rotation, blur };

struct CorruptionSpec {
  CorruptionKind kind;
  int severity;  // 1..5
};

std::string corruption_name(CorruptionKind kind);
CorruptionKind parse_corruption(const std::string& name);

/// Parameter of `kind` at severity 1..5.
double corruption_level(CorruptionKind kind, int severity);

/// Labels and sample count are never changed. Throws UnsupportedError for
/// blur on point data and ParameterError for a severity outside 1..5.
Dataset corrupt(const Dataset& ds, const CorruptionSpec& spec, std::uint64_t seed);

/// CSV with header sample,f0,...,f{d-1},label.
std::string dataset_to_csv(const Dataset& ds);

}  // namespace rrauq
