#pragma once

#include <string_view>
#include <vector>

#include "falcon/nn.hpp"

namespace falcon {

enum class OptimizerKind { sgd_momentum, rmsprop };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  double learning_rate = 5e-4;
  double momentum = 0.9;  // sgd-momentum
  double rho = 0.9;       // rmsprop decay
  double epsilon = 1e-7;  // rmsprop denominator guard
  double l2 = 0.0;        // decoupled weight decay

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

/// Update rules, per parameter p with gradient g:
///   sgd-momentum  v <- mu*v + g;                 p <- p - lr*v
///   rmsprop       s <- rho*s + (1-rho)*g^2;      p <- p - lr*g/(sqrt(s)+eps)
/// followed in both cases by decoupled decay p <- p - lr*l2*p_old.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, const Model& model);

  /// Applies one update and clears the model's gradients.
  void step(Model& model);

  const OptimizerConfig& config() const { return config_; }
  const std::vector<std::vector<Scalar>>& buffers() const { return buffers_; }

 private:
  OptimizerConfig config_;
  std::vector<std::vector<Scalar>> buffers_;
};

}  // namespace falcon
