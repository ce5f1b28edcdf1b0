#pragma once

// Dense tensors with define-by-run reverse-mode differentiation.
//
// Every differentiable operation (see ops.hpp) appends a record to the
// calling thread's Tape when gradient recording is enabled and at least one
// input requires a gradient. backward() sweeps the tape once in reverse and
// then clears it, so each forward pass builds a fresh tape.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace falcon {

#ifdef FALCON_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

/// Lower clamp shared by log, division, the sqrt guard and the losses.
inline constexpr double kClampDelta = 1e-12;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<Scalar> data;
  std::vector<Scalar> grad;  // empty == no gradient
  bool requires_grad = false;

  std::vector<Scalar>& ensure_grad();
};

using NodePtr = std::shared_ptr<TensorNode>;

}  // namespace detail

class Tensor {
 public:
  /// Empty tensor of shape {0}.
  Tensor();
  Tensor(Shape shape, std::vector<Scalar> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const Scalar> data() const { return node_->data; }
  /// In-place access for parameter updates and data loaders. Not recorded.
  std::span<Scalar> mutable_data() { return node_->data; }
  Scalar operator[](std::size_t i) const { return node_->data[i]; }
  /// Value of a single-element tensor.
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const Scalar> grad() const;
  std::span<Scalar> mutable_grad();
  /// Allocates (if needed) and zero-fills the gradient buffer.
  void zero_grad();
  /// Releases the gradient buffer; has_grad() becomes false.
  void clear_grad() { node_->grad.clear(); }

  /// New leaf holding a copy of the values; never records.
  Tensor detach() const;
  /// Deep copy keeping requires_grad and any gradient.
  Tensor clone() const;

  bool all_finite() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const detail::NodePtr& node() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

/// Thread-local switch for gradient recording.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

/// Disables recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Ordered log of recorded primitives for the current thread.
class Tape {
 public:
  struct Record {
    const char* op = "";
    std::vector<detail::NodePtr> inputs;
    detail::NodePtr output;
    std::function<void()> backward;
  };

  static Tape& active();

  void record(Record record);
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::span<const Record> records() const { return records_; }
  void clear() { records_.clear(); }
  void swap(Tape& other) noexcept { records_.swap(other.records_); }

 private:
  std::vector<Record> records_;
};

/// Gives its lifetime a fresh, empty tape with recording enabled; the previous
/// tape and grad mode are restored on exit. Used for nested gradient passes
/// such as FGSM input gradients.
class TapeScope {
 public:
  TapeScope() : mode_(GradMode::enabled()) {
    Tape::active().swap(saved_);
    GradMode::set_enabled(true);
  }
  ~TapeScope() {
    Tape::active().swap(saved_);
    GradMode::set_enabled(mode_);
  }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape saved_;
  bool mode_;
};

/// Accumulates d(loss)/d(t) into every recorded tensor t that requires a
/// gradient, then clears the tape. Throws ContractError for a non-scalar loss;
/// a no-op when the tape is empty.
void backward(const Tensor& loss);

}  // namespace falcon
