#pragma once

// Differentiable primitives. Each returns a new tensor and records a backward
// rule on the active tape when recording is enabled and an input requires a
// gradient. Shape mismatches throw DimensionError naming both shapes.

#include <cstddef>

#include "falcon/tensor.hpp"

namespace falcon::ops {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// a / max(b, kClampDelta); denominators are expected to be non-negative.
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, Scalar c);
Tensor scale(const Tensor& a, Scalar c);

/// x[r x c] + bias[c], broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
/// log(max(x, kClampDelta)); zero gradient where the clamp is active.
Tensor log(const Tensor& x);
/// Expects x >= 0; callers guard zero (see adv_calibration_loss).
Tensor sqrt(const Tensor& x);

/// Sum / mean of all elements, shape {}.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Row sums of x[r x c], shape {r}.
Tensor sum_rows(const Tensor& x);
/// Row maxima of x[r x c], shape {r}; the gradient goes to the first maximal entry.
Tensor max_rows(const Tensor& x);

/// Numerically stable softmax over each row of x[r x c].
Tensor softmax_rows(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

/// x[n x cin x h x w] * weight[cout x cin x k x k] + bias[cout].
/// Zero padding of `padding` pixels on each side.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// Max pooling over non-overlapping (or strided) size x size windows of x[n x c x h x w].
Tensor maxpool2d(const Tensor& x, std::size_t size, std::size_t stride);

}  // namespace falcon::ops
