#include "falcon/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "falcon/error.hpp"

namespace falcon {

double grad_check(const ScalarFunction& f, const Tensor& x, double step) {
  Tape::active().clear();
  Tensor probe = x.detach();
  probe.set_requires_grad(true);
  const Tensor y = f(probe);
  if (y.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  backward(y);
  std::vector<Scalar> analytic(probe.numel(), Scalar{0});
  if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  const auto h = static_cast<Scalar>(step);
  double worst = 0.0;
  Tensor moved = x.detach();
  auto values = moved.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Scalar original = values[i];
    values[i] = original + h;
    const double up = f(moved).item();
    values[i] = original - h;
    const double down = f(moved).item();
    values[i] = original;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

}  // namespace falcon
