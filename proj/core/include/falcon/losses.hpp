#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "falcon/tensor.hpp"

namespace falcon {

struct LossWeights {
  double lambda_adv = 0.0;
  double lambda_s = 0.0;

  void validate() const;
};

/// [b x C] one-hot rows for integer labels.
Tensor one_hot(std::span<const int> labels, std::size_t classes);

/// Mean over the batch of -log p(true class), probabilities clamped at
/// kClampDelta. Throws ContractError unless every label row is one-hot.
Tensor cce_loss(const Tensor& probs, const Tensor& onehot);

/// Entropy term pushing the wrong-class mass toward uniform:
///   (1/b) sum_i sum_j -(1/C) log(p_ij (1 - y_ij) + y_ij)
/// The true class contributes log(1) = 0, so the value never depends on it.
Tensor entropy_loss(const Tensor& probs, const Tensor& onehot);

/// Adversarial calibration term: sqrt(sum_i (acc(B_{m_i}) - conf_i)^2 + delta),
/// where conf_i is the max probability and acc(B_m) the accuracy of the
/// batch-local bin holding sample i. The bin accuracies are constants, so the
/// gradient flows through conf_i only. Not normalized by the batch size.
Tensor adv_calibration_loss(const Tensor& probs, std::span<const int> labels, std::size_t num_bins);

/// Pass 1 of adv_calibration_loss: for each sample, the accuracy of its
/// batch-local confidence bin.
std::vector<Scalar> binned_accuracy(const Tensor& probs, std::span<const int> labels, std::size_t num_bins);

/// Pass 2: sqrt(sum_i (acc_i - max_j p_ij)^2 + delta) for fixed acc.
Tensor calibration_gap_loss(const Tensor& probs, std::span<const Scalar> acc);

/// cce + lambda_adv * l_adv + lambda_s * l_s.
Tensor total_loss(const Tensor& cce, const Tensor& l_adv, const Tensor& l_s, const LossWeights& w);

}  // namespace falcon
