#include "falcon/losses.hpp"

#include <cmath>
#include <string>

#include "falcon/error.hpp"
#include "falcon/metrics.hpp"
#include "falcon/nn.hpp"
#include "falcon/ops.hpp"

namespace falcon {

void LossWeights::validate() const {
  if (!(lambda_adv >= 0.0) || !std::isfinite(lambda_adv)) throw ContractError("lambda_adv must be finite and >= 0");
  if (!(lambda_s >= 0.0) || !std::isfinite(lambda_s)) throw ContractError("lambda_s must be finite and >= 0");
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor out = Tensor::zeros({labels.size(), classes});
  auto data = out.mutable_data();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ContractError("label " + std::to_string(labels[i]) + " out of range for " + std::to_string(classes) +
                          " classes");
    }
    data[i * classes + static_cast<std::size_t>(labels[i])] = Scalar{1};
  }
  return out;
}

namespace {

void check_pair(const char* what, const Tensor& probs, const Tensor& onehot) {
  if (probs.rank() != 2 || probs.shape() != onehot.shape()) {
    throw DimensionError(std::string(what) + ": probs " + shape_string(probs.shape()) + " vs labels " +
                         shape_string(onehot.shape()));
  }
  if (probs.dim(0) == 0) throw ContractError(std::string(what) + ": empty batch");
}

}  // namespace

Tensor cce_loss(const Tensor& probs, const Tensor& onehot) {
  check_pair("cce_loss", probs, onehot);
  const std::size_t c = onehot.dim(1);
  const auto y = onehot.data();
  for (std::size_t i = 0; i < onehot.dim(0); ++i) {
    int ones = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const Scalar v = y[i * c + j];
      if (v == Scalar{1}) {
        ++ones;
      } else if (v != Scalar{0}) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw ContractError("cce_loss: label row " + std::to_string(i) + " is not one-hot");
  }
  const Tensor picked = ops::sum_rows(ops::mul(onehot, ops::log(probs)));
  return ops::scale(ops::mean(picked), Scalar{-1});
}

Tensor entropy_loss(const Tensor& probs, const Tensor& onehot) {
  check_pair("entropy_loss", probs, onehot);
  const auto b = static_cast<Scalar>(probs.dim(0));
  const auto c = static_cast<Scalar>(probs.dim(1));
  const Tensor wrong = ops::add_scalar(ops::scale(onehot, Scalar{-1}), Scalar{1});
  const Tensor arg = ops::add(ops::mul(probs, wrong), onehot);
  return ops::scale(ops::sum(ops::log(arg)), Scalar{-1} / (c * b));
}

std::vector<Scalar> binned_accuracy(const Tensor& probs, std::span<const int> labels, std::size_t num_bins) {
  if (probs.rank() != 2) throw DimensionError("adv_calibration_loss expects [b x C] probs, got " + shape_string(probs.shape()));
  const std::size_t b = probs.dim(0), c = probs.dim(1);
  if (b == 0) throw ContractError("adv_calibration_loss: empty batch");
  if (num_bins < 1) throw ContractError("adv_calibration_loss: number of bins must be >= 1");
  if (labels.size() != b) {
    throw DimensionError("adv_calibration_loss: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(b));
  }
  const auto predicted = argmax_rows(probs);
  std::vector<std::size_t> bin(b);
  std::vector<double> hits(num_bins, 0.0), counts(num_bins, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    bin[i] = bin_index(static_cast<double>(probs[i * c + static_cast<std::size_t>(predicted[i])]), num_bins) - 1;
    counts[bin[i]] += 1.0;
    hits[bin[i]] += predicted[i] == labels[i] ? 1.0 : 0.0;
  }
  std::vector<Scalar> acc(b);
  for (std::size_t i = 0; i < b; ++i) acc[i] = static_cast<Scalar>(hits[bin[i]] / counts[bin[i]]);
  return acc;
}

Tensor calibration_gap_loss(const Tensor& probs, std::span<const Scalar> acc) {
  if (probs.rank() != 2 || probs.dim(0) != acc.size()) {
    throw DimensionError("calibration_gap_loss: probs " + shape_string(probs.shape()) + " vs " +
                         std::to_string(acc.size()) + " bin accuracies");
  }
  const Tensor conf = ops::max_rows(probs);
  const Tensor diff = ops::sub(Tensor({acc.size()}, std::vector<Scalar>(acc.begin(), acc.end())), conf);
  return ops::sqrt(ops::add_scalar(ops::sum(ops::mul(diff, diff)), static_cast<Scalar>(kClampDelta)));
}

Tensor adv_calibration_loss(const Tensor& probs, std::span<const int> labels, std::size_t num_bins) {
  const auto acc = binned_accuracy(probs, labels, num_bins);
  return calibration_gap_loss(probs, acc);
}

Tensor total_loss(const Tensor& cce, const Tensor& l_adv, const Tensor& l_s, const LossWeights& w) {
  w.validate();
  return ops::add(ops::add(cce, ops::scale(l_adv, static_cast<Scalar>(w.lambda_adv))),
                  ops::scale(l_s, static_cast<Scalar>(w.lambda_s)));
}

}  // namespace falcon
