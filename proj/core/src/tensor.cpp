#include "falcon/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "falcon/error.hpp"

namespace falcon {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

std::vector<Scalar>& TensorNode::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), Scalar{0});
  return grad;
}

}  // namespace detail

Tensor::Tensor() : node_(std::make_shared<detail::TensorNode>()) { node_->shape = {0}; }

Tensor::Tensor(Shape shape, std::vector<Scalar> data, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), Scalar{0}, requires_grad); }

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<Scalar>(n, value), requires_grad);
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) { return Tensor(Shape{}, {value}, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape()));
  }
  return node_->shape[axis];
}

Scalar Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

std::span<const Scalar> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

std::span<Scalar> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), Scalar{0}); }

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data, false); }

Tensor Tensor::clone() const {
  auto node = std::make_shared<detail::TensorNode>(*node_);
  return Tensor(std::move(node));
}

bool Tensor::all_finite() const {
  return std::all_of(node_->data.begin(), node_->data.end(), [](Scalar v) { return std::isfinite(v); });
}

namespace {
thread_local bool grad_mode_enabled = true;
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool on) { grad_mode_enabled = on; }

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(Record record) { records_.push_back(std::move(record)); }

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  auto& tape = Tape::active();
  if (tape.empty()) return;

  auto& seed = loss.node()->ensure_grad();
  seed[0] += Scalar{1};

  const auto records = tape.records();
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
  tape.clear();
}

}  // namespace falcon
