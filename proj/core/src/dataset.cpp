#include "falcon/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "falcon/error.hpp"

namespace falcon {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

void Dataset::validate() const {
  if (labels.empty()) throw ConsistencyError("dataset is empty");
  if (classes < 2) throw ConsistencyError("dataset needs at least 2 classes");
  if (inputs.rank() != 2 || inputs.dim(0) != labels.size() || inputs.dim(1) != sample_dim()) {
    throw ConsistencyError("dataset inputs " + shape_string(inputs.shape()) + " do not match " +
                           std::to_string(labels.size()) + " samples of shape " + shape_string(sample_shape));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ConsistencyError("label " + std::to_string(y) + " out of range for " + std::to_string(classes) + " classes");
    }
  }
  for (Scalar v : inputs.data()) {
    if (!(v >= value_min && v <= value_max)) {
      throw ConsistencyError("input value " + std::to_string(v) + " outside [" + std::to_string(value_min) + ", " +
                             std::to_string(value_max) + "]");
    }
  }
}

Dataset Dataset::slice(std::size_t begin, std::size_t end, Split new_split) const {
  if (begin > end || end > size()) throw ContractError("dataset slice out of range");
  const std::size_t d = sample_dim();
  Dataset out;
  out.inputs = Tensor({end - begin, d}, std::vector<Scalar>(inputs.data().begin() + static_cast<std::ptrdiff_t>(begin * d),
                                                            inputs.data().begin() + static_cast<std::ptrdiff_t>(end * d)));
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end));
  out.split = new_split;
  out.classes = classes;
  out.sample_shape = sample_shape;
  out.value_min = value_min;
  out.value_max = value_max;
  return out;
}

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  const std::size_t d = sample_dim();
  std::vector<Scalar> out(indices.size() * d);
  const auto src = inputs.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(indices[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return Tensor({indices.size(), d}, std::move(out));
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
  return out;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw IoError(path.string() + ": truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path, Split split) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  if (const auto magic = read_be32(images, 0, images_path); magic != 0x00000803) {
    throw FormatError(images_path.string() + ": bad image magic " + std::to_string(magic));
  }
  if (const auto magic = read_be32(labels, 0, labels_path); magic != 0x00000801) {
    throw FormatError(labels_path.string() + ": bad label magic " + std::to_string(magic));
  }
  const std::size_t n = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t n_labels = read_be32(labels, 4, labels_path);
  if (n != n_labels) {
    throw ConsistencyError("image file holds " + std::to_string(n) + " records but label file holds " +
                           std::to_string(n_labels));
  }
  const std::size_t d = rows * cols;
  if (images.size() < 16 + n * d) throw IoError(images_path.string() + ": truncated pixel data");
  if (labels.size() < 8 + n) throw IoError(labels_path.string() + ": truncated label data");

  Dataset out;
  std::vector<Scalar> pixels(n * d);
  for (std::size_t i = 0; i < n * d; ++i) pixels[i] = static_cast<Scalar>(images[16 + i]) / Scalar{255};
  out.inputs = Tensor({n, d}, std::move(pixels));
  out.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = labels[8 + i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.classes = std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1);
  out.split = split;
  out.sample_shape = {rows, cols};
  out.validate();
  return out;
}

MnistSplits load_mnist(const std::filesystem::path& dir, std::size_t validation_size, std::size_t train_limit,
                       std::size_t test_limit) {
  const Dataset full = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", Split::train);
  const Dataset test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", Split::test);
  if (validation_size >= full.size()) throw ContractError("validation split would consume the whole training set");
  const std::size_t train_end = full.size() - validation_size;
  MnistSplits out;
  out.train = full.slice(0, train_limit ? std::min(train_limit, train_end) : train_end, Split::train);
  out.validation = full.slice(train_end, full.size(), Split::val);
  out.test = test.slice(0, test_limit ? std::min(test_limit, test.size()) : test.size(), Split::test);
  return out;
}

namespace {

Dataset draw_gaussians(std::mt19937_64& rng, std::size_t n, double shift, Split split) {
  std::normal_distribution<double> noise(0.0, 0.5);
  Dataset out;
  std::vector<Scalar> xs(2 * n);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    out.labels[i] = y;
    xs[2 * i] = static_cast<Scalar>((y == 1 ? 1.0 : -1.0) + noise(rng) + shift);
    xs[2 * i + 1] = static_cast<Scalar>(noise(rng));
  }
  out.inputs = Tensor({n, 2}, std::move(xs));
  out.split = split;
  out.classes = 2;
  out.sample_shape = {2};
  out.value_min = -kSyntheticRange;
  out.value_max = kSyntheticRange;
  out.validate();
  return out;
}

}  // namespace

SyntheticShift gen_synthetic_shift(std::uint64_t seed, std::size_t n, double shift_distance) {
  if (n < 10) throw ContractError("synthetic shift benchmark needs n >= 10");
  if (!std::isfinite(shift_distance) || std::abs(shift_distance) > kSyntheticRange / 2) {
    throw ContractError("shift distance must be finite and within +-" + std::to_string(kSyntheticRange / 2));
  }
  std::mt19937_64 rng(seed);
  SyntheticShift out;
  out.train = draw_gaussians(rng, n, 0.0, Split::train);
  out.shifted_test = draw_gaussians(rng, n, shift_distance, Split::test);
  return out;
}

}  // namespace falcon
