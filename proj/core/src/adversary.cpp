#include "falcon/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "falcon/error.hpp"
#include "falcon/losses.hpp"

namespace falcon {

void AdversarialConfig::validate() const {
  if (epsilon_set.empty()) throw ContractError("epsilon set must not be empty");
  for (std::size_t i = 0; i < epsilon_set.size(); ++i) {
    if (!(epsilon_set[i] >= 0.0) || !std::isfinite(epsilon_set[i])) throw ContractError("epsilons must be finite and >= 0");
    if (i > 0 && epsilon_set[i] < epsilon_set[i - 1]) throw ContractError("epsilon set must be sorted ascending");
  }
  if (!(clip_min < clip_max)) throw ContractError("clip_min must be below clip_max");
}

double sample_epsilon(const AdversarialConfig& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_int_distribution<std::size_t> pick(0, cfg.epsilon_set.size() - 1);
  return cfg.epsilon_set[pick(rng)];
}

namespace {

// Freezes parameters and switches to eval mode for the input-gradient pass.
class FrozenForAttack {
 public:
  explicit FrozenForAttack(Model& model) : model_(model), training_(model.training()) {
    for (const auto& p : model.parameters()) flags_.push_back(p.requires_grad());
    model.set_requires_grad(false);
    model.set_training(false);
  }
  ~FrozenForAttack() {
    auto& params = model_.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].set_requires_grad(flags_[i]);
    model_.set_training(training_);
  }
  FrozenForAttack(const FrozenForAttack&) = delete;
  FrozenForAttack& operator=(const FrozenForAttack&) = delete;

 private:
  Model& model_;
  bool training_;
  std::vector<bool> flags_;
};

}  // namespace

Tensor fgsm_generate(Model& model, const Tensor& inputs, std::span<const int> labels, double epsilon,
                     const AdversarialConfig& cfg) {
  cfg.validate();
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ContractError("epsilon must be finite and >= 0");
  if (epsilon == 0.0) return inputs.detach();

  std::vector<Scalar> grad;
  {
    TapeScope scope;
    FrozenForAttack frozen(model);
    Tensor x = inputs.detach();
    x.set_requires_grad(true);
    const Tensor loss = cce_loss(softmax(model.forward(x)), one_hot(labels, model.classes()));
    backward(loss);
    if (x.has_grad()) grad.assign(x.grad().begin(), x.grad().end());
  }

  const auto eps = static_cast<Scalar>(epsilon);
  const auto lo = static_cast<Scalar>(cfg.clip_min), hi = static_cast<Scalar>(cfg.clip_max);
  Tensor adv = inputs.detach();
  auto out = adv.mutable_data();
  for (std::size_t i = 0; i < out.size() && !grad.empty(); ++i) {
    if (grad[i] == Scalar{0}) continue;
    const Scalar x = out[i];
    Scalar a = std::clamp(grad[i] > 0 ? x + eps : x - eps, lo, hi);
    // Rounding of x +- eps may overshoot the budget by an ulp; pull back.
    while (std::abs(a - x) > eps) a = std::nextafter(a, x);
    out[i] = a;
  }
  return adv;
}

}  // namespace falcon
