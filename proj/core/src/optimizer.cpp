#include "falcon/optimizer.hpp"

#include <cmath>
#include <string>

#include "falcon/error.hpp"

namespace falcon {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::rmsprop ? "rmsprop" : "sgd-momentum";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd-momentum") return OptimizerKind::sgd_momentum;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  throw RegistryError("unknown optimizer '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ContractError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("momentum must lie in [0, 1)");
  if (!(rho >= 0.0 && rho < 1.0)) throw ContractError("rmsprop rho must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ContractError("rmsprop epsilon must be > 0");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ContractError("l2 coefficient must be >= 0");
}

Optimizer::Optimizer(OptimizerConfig config, const Model& model) : config_(config) {
  config_.validate();
  for (const auto& p : model.parameters()) buffers_.emplace_back(p.numel(), Scalar{0});
}

void Optimizer::step(Model& model) {
  auto& params = model.parameters();
  if (params.size() != buffers_.size()) throw ContractError("optimizer state does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ContractError("parameter " + std::to_string(i) + " has no gradient; run backward() first");
    }
  }

  const auto lr = static_cast<Scalar>(config_.learning_rate);
  const auto decay = static_cast<Scalar>(config_.learning_rate * config_.l2);
  const auto mu = static_cast<Scalar>(config_.momentum);
  const auto rho = static_cast<Scalar>(config_.rho);
  const auto eps = static_cast<Scalar>(config_.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    const auto g = params[i].grad();
    auto& buf = buffers_[i];
    if (buf.size() != p.size()) throw ContractError("optimizer buffer " + std::to_string(i) + " has the wrong size");
    for (std::size_t j = 0; j < p.size(); ++j) {
      const Scalar old = p[j];
      Scalar update;
      if (config_.kind == OptimizerKind::sgd_momentum) {
        buf[j] = mu * buf[j] + g[j];
        update = lr * buf[j];
      } else {
        buf[j] = rho * buf[j] + (Scalar{1} - rho) * g[j] * g[j];
        update = lr * g[j] / (std::sqrt(buf[j]) + eps);
      }
      p[j] = old - update;
      if (decay != Scalar{0}) p[j] -= decay * old;
    }
    params[i].clear_grad();
  }
}

}  // namespace falcon
