#pragma once

#include <functional>

#include "falcon/tensor.hpp"

namespace falcon {

using ScalarFunction = std::function<Tensor(const Tensor&)>;

/// Compares the tape gradient of f at x with central differences and returns
/// max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
double grad_check(const ScalarFunction& f, const Tensor& x, double step = 1e-5);

}  // namespace falcon
