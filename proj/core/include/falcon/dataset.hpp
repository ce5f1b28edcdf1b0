#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "falcon/tensor.hpp"

namespace falcon {

enum class Split { train, val, test };

std::string_view to_string(Split split);

/// Flat inputs [n x D] with per-sample shape and the valid input range used
/// for FGSM clipping. Image datasets live in [0, 1].
struct Dataset {
  Tensor inputs;
  std::vector<int> labels;
  Split split = Split::train;
  std::size_t classes = 0;
  Shape sample_shape;
  double value_min = 0.0;
  double value_max = 1.0;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_dim() const { return shape_numel(sample_shape); }

  /// Throws ConsistencyError when an invariant does not hold.
  void validate() const;

  /// Rows [begin, end) as a new dataset.
  Dataset slice(std::size_t begin, std::size_t end, Split split) const;
  Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801),
/// scaling pixels by 1/255. Throws FormatError on bad magic, ConsistencyError on
/// a count mismatch and IoError on unreadable or truncated files.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, Split split = Split::train);

struct MnistSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Standard MNIST file names under `dir`. The last `validation_size` training
/// samples become the validation split. Limits of 0 keep everything.
MnistSplits load_mnist(const std::filesystem::path& dir, std::size_t validation_size = 5000, std::size_t train_limit = 0,
                       std::size_t test_limit = 0);

struct SyntheticShift {
  Dataset train;
  Dataset shifted_test;
};

/// Two isotropic 2-D Gaussian classes (means (-1,0) and (+1,0), sigma 0.5),
/// n samples each split. The test draw is translated by (shift_distance, 0),
/// along the axis separating the classes. Deterministic per seed.
SyntheticShift gen_synthetic_shift(std::uint64_t seed, std::size_t n, double shift_distance);

/// Valid input range declared for synthetic data; wide enough that FGSM
/// clipping never binds.
inline constexpr double kSyntheticRange = 100.0;

}  // namespace falcon
