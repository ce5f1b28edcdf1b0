#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "falcon/tensor.hpp"

namespace falcon {

using Rng = std::mt19937_64;

enum class LayerKind { dense, conv2d, relu, dropout, flatten, maxpool2d };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;    // dense
  std::size_t filters = 0;  // conv2d
  std::size_t kernel = 0;   // conv2d kernel, maxpool2d window
  std::size_t stride = 1;   // conv2d, maxpool2d
  double rate = 0.0;        // dropout

  static LayerSpec dense(std::size_t units);
  /// Odd kernels only; zero "same" padding of kernel/2.
  static LayerSpec conv2d(std::size_t filters, std::size_t kernel, std::size_t stride = 1);
  static LayerSpec relu();
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec maxpool2d(std::size_t size);

  void validate() const;
  bool has_parameters() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  bool operator==(const LayerSpec&) const = default;
};

struct Architecture {
  std::string name = "custom";
  Shape input_shape;  // per sample, e.g. {784} or {1, 28, 28}
  std::vector<LayerSpec> layers;
  std::size_t classes = 0;

  std::size_t input_dim() const { return shape_numel(input_shape); }
  bool operator==(const Architecture&) const = default;
};

/// Reference architectures:
///   "mlp-small"  784 -> 128 -> 128 -> C, relu, dropout after each hidden layer
///   "lenet-like" conv5(8) pool2 conv5(16) pool2 -> 128 -> C on 1x28x28 inputs
///   "mlp-tiny"   2 -> 64 -> 64 -> C, for the synthetic two-Gaussian task
/// These approximate the small image classifiers used in the MNIST experiments;
/// exact widths of the originals are unknown. An empty input_shape selects the
/// preset's default.
Architecture make_preset(std::string_view name, std::size_t classes, double dropout = 0.5, Shape input_shape = {});

/// A feed-forward classifier producing logits of shape [batch x classes].
class Model {
 public:
  /// Validates that the layer shapes compose and initializes parameters with
  /// fan-in scaled uniform draws (He bound for layers feeding a relu).
  Model(Architecture arch, std::uint64_t seed);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const Architecture& architecture() const { return arch_; }
  std::size_t classes() const { return arch_.classes; }
  std::size_t input_dim() const { return arch_.input_dim(); }
  std::uint64_t seed() const { return seed_; }

  bool training() const { return training_; }
  void set_training(bool on) { training_ = on; }

  /// Logits for a batch of shape [b x D] or [b, input_shape...]. Records on the
  /// tape; applies dropout only in training mode.
  Tensor forward(const Tensor& batch);

  /// Eval-mode forward without recording. Never touches parameters or RNG state.
  Tensor predict_logits(const Tensor& batch) const;
  Tensor predict_probs(const Tensor& batch) const;

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  std::vector<Scalar> flat_parameters() const;
  void set_flat_parameters(std::span<const Scalar> values);

  void set_requires_grad(bool on);
  void zero_grad();
  void clear_grad();

  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

 private:
  Tensor run(const Tensor& batch, bool training, Rng* rng) const;

  Architecture arch_;
  std::uint64_t seed_ = 0;
  std::vector<Tensor> params_;
  bool training_ = false;
  Rng dropout_rng_;
};

/// Row-wise softmax; the confidence of a prediction is the row maximum.
Tensor softmax(const Tensor& logits);

/// Index of the largest entry of each row of probs[b x C].
std::vector<int> argmax_rows(const Tensor& probs);

}  // namespace falcon
