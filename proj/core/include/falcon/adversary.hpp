#pragma once

#include <span>
#include <vector>

#include "falcon/nn.hpp"

namespace falcon {

struct AdversarialConfig {
  std::vector<double> epsilon_set = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
  double clip_min = 0.0;
  double clip_max = 1.0;

  void validate() const;
  bool operator==(const AdversarialConfig&) const = default;
};

/// Uniform draw from the epsilon set.
double sample_epsilon(const AdversarialConfig& cfg, Rng& rng);

/// clip(x + epsilon * sign(dCCE/dx), clip_min, clip_max), with sign(0) = 0 and
/// |adv - x| <= epsilon enforced exactly in floating point. The input gradient
/// is taken in eval mode on a private tape; parameters, their gradients, the
/// training flag and the caller's tape are left as they were.
Tensor fgsm_generate(Model& model, const Tensor& inputs, std::span<const int> labels, double epsilon,
                     const AdversarialConfig& cfg);

}  // namespace falcon
