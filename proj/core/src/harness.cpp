#include "falcon/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "falcon/adversary.hpp"
#include "falcon/error.hpp"
#include "falcon/losses.hpp"
#include "falcon/ops.hpp"
#include "falcon/optimizer.hpp"

namespace falcon {

Model build_model(const TrainConfig& cfg, const Dataset& data) {
  return Model(make_preset(cfg.model, data.classes, cfg.dropout, data.sample_shape), cfg.seed);
}

namespace {

constexpr std::size_t kEvalChunk = 512;

void emit(const TrainHooks* hooks, std::string_view event, std::size_t step) {
  if (hooks && hooks->on_event) hooks->on_event(event, step);
}

double checked(const Tensor& loss, std::size_t step, const char* term) {
  const double v = static_cast<double>(loss.item());
  if (!std::isfinite(v)) {
    throw DivergenceError("non-finite " + std::string(term) + " (" + std::to_string(v) + ") at step " +
                          std::to_string(step));
  }
  return v;
}

double validation_accuracy(const Model& model, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(begin + kEvalChunk, data.size());
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const auto predicted = argmax_rows(model.predict_logits(data.gather(idx)));
    for (std::size_t i = 0; i < idx.size(); ++i) hits += predicted[i] == data.labels[idx[i]];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

enum class Objective { falcon, ensemble };

struct LoopSpec {
  Objective objective = Objective::falcon;
  bool use_ls = false;
  bool use_adv = false;
  double ensemble_epsilon = 0.0;
};

TrainResult run_training(Model model, const Dataset& train, const TrainConfig& cfg, const Dataset* validation,
                         const TrainHooks* hooks, const LoopSpec& spec) {
  cfg.validate();
  train.validate();
  if (model.classes() != train.classes || model.input_dim() != train.sample_dim()) {
    throw DimensionError("model expects " + std::to_string(model.input_dim()) + " inputs and " +
                         std::to_string(model.classes()) + " classes; data has " + std::to_string(train.sample_dim()) +
                         " and " + std::to_string(train.classes));
  }

  const AdversarialConfig adv_cfg{cfg.epsilon_set, train.value_min, train.value_max};
  Optimizer optimizer(cfg.optimizer, model);
  Rng shuffle_rng(cfg.seed ^ 0x73687566666c65ULL);
  Rng epsilon_rng(cfg.seed ^ 0x657073696c6f6eULL);
  const auto lambda_s = static_cast<Scalar>(cfg.lambda_s * cfg.entropy_scale);
  const auto lambda_adv = static_cast<Scalar>(cfg.lambda_adv);

  const std::size_t n = train.size();
  const std::size_t b = std::min(cfg.batch_size, n);
  const std::size_t batches = n / b;
  std::vector<std::size_t> order(n);

  TrainResult result{std::move(model), {}};
  Model& net = result.model;
  TrainHistory& history = result.history;
  double best = -1.0;
  std::size_t stale = 0;
  std::size_t step = 0;
  bool done = cfg.max_steps != 0 && step >= cfg.max_steps;

  for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t batch = 0; batch < batches && !done; ++batch) {
      const std::span<const std::size_t> idx(order.data() + batch * b, b);
      const Tensor x = train.gather(idx);
      const std::vector<int> y = train.gather_labels(idx);
      const Tensor onehot = one_hot(y, train.classes);
      HistoryRow row;
      row.step = step;
      row.epoch = epoch;

      Tape::active().clear();
      net.set_training(true);

      if (spec.objective == Objective::ensemble) {
        const bool adversarial = spec.ensemble_epsilon > 0.0;
        Tensor x_adv;
        if (adversarial) x_adv = fgsm_generate(net, x, y, spec.ensemble_epsilon, adv_cfg);
        row.epsilon = spec.ensemble_epsilon;
        Tensor loss = cce_loss(softmax(net.forward(x)), onehot);
        row.l_cce = checked(loss, step, "L_CCE");
        if (adversarial) {
          const Tensor adv_loss = cce_loss(softmax(net.forward(x_adv)), onehot);
          checked(adv_loss, step, "L_CCE(FGSM)");
          loss = ops::add(loss, adv_loss);
        }
        backward(loss);
        emit(hooks, "clean", step);
        optimizer.step(net);
        emit(hooks, "update", step);
      } else {
        const double epsilon = spec.use_adv ? sample_epsilon(adv_cfg, epsilon_rng) : 0.0;
        row.epsilon = epsilon;

        // One step on L_CCE + lambda_S L_S over the clean batch.
        const Tensor probs = softmax(net.forward(x));
        const Tensor cce = cce_loss(probs, onehot);
        row.l_cce = checked(cce, step, "L_CCE");
        Tensor objective = cce;
        if (spec.use_ls) {
          const Tensor ls = entropy_loss(probs, onehot);
          row.l_s = checked(ls, step, "L_S");
          objective = ops::add(cce, ops::scale(ls, lambda_s));
        }
        backward(objective);
        emit(hooks, "clean", step);

        // The FGSM batch comes from the same pre-update parameters; its
        // construction leaves the clean gradients untouched.
        Tensor x_adv;
        if (spec.use_adv) {
          x_adv = fgsm_generate(net, x, y, epsilon, adv_cfg);
          emit(hooks, "fgsm", step);
        }
        optimizer.step(net);
        emit(hooks, "update", step);

        // Binned accuracy on MB_adv, then one step on lambda_adv L_adv.
        if (spec.use_adv) {
          const Tensor adv_probs = softmax(net.forward(x_adv));
          const Tensor l_adv = adv_calibration_loss(adv_probs, y, cfg.num_bins);
          row.l_adv = checked(l_adv, step, "L_adv");
          backward(ops::scale(l_adv, lambda_adv));
          emit(hooks, "adv", step);
          optimizer.step(net);
          emit(hooks, "update", step);
        }
      }

      history.rows.push_back(row);
      ++step;
      done = cfg.max_steps != 0 && step >= cfg.max_steps;
    }
    history.epochs_run = epoch + 1;

    if (validation != nullptr && cfg.patience > 0) {
      const double acc = validation_accuracy(net, *validation);
      history.validation_accuracy.push_back(acc);
      if (acc > best) {
        best = acc;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        history.stopped_early = true;
        break;
      }
    }
  }
  net.set_training(false);
  Tape::active().clear();
  return result;
}

}  // namespace

TrainResult train_falcon(Model model, const Dataset& train, const TrainConfig& cfg, const Dataset* validation,
                         const TrainHooks* hooks) {
  LoopSpec spec;
  const bool ls_mode = cfg.mode == TrainMode::falcon || cfg.mode == TrainMode::falcon_ls_only;
  const bool adv_mode = cfg.mode == TrainMode::falcon || cfg.mode == TrainMode::falcon_ladv_only;
  spec.use_ls = ls_mode && cfg.lambda_s > 0.0;
  spec.use_adv = adv_mode && cfg.lambda_adv > 0.0;
  return run_training(std::move(model), train, cfg, validation, hooks, spec);
}

TrainResult train_baseline(Model model, const Dataset& train, const TrainConfig& cfg, const Dataset* validation,
                           const TrainHooks* hooks) {
  return run_training(std::move(model), train, cfg, validation, hooks, LoopSpec{});
}

Tensor Ensemble::predict_probs(const Tensor& inputs) const {
  if (members.empty()) throw ContractError("ensemble has no members");
  if (members.size() == 1 && temperature == 1.0) return members.front().predict_probs(inputs);
  const TemperatureScaler scaler{temperature};
  std::vector<Scalar> total;
  for (const auto& m : members) {
    const Tensor probs = apply_temperature(scaler, m.predict_logits(inputs));
    if (total.empty()) {
      total.assign(probs.data().begin(), probs.data().end());
    } else {
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += probs[i];
    }
  }
  const auto k = static_cast<Scalar>(members.size());
  for (auto& v : total) v /= k;
  return Tensor({inputs.dim(0), classes()}, std::move(total));
}

Tensor Ensemble::predict_logits(const Tensor& inputs) const {
  if (members.size() != 1) throw ContractError("logits are only defined for a single-member predictor");
  return members.front().predict_logits(inputs);
}

Ensemble train_ensemble(std::size_t k, const Dataset& train, const TrainConfig& cfg, double adv_epsilon,
                        const Dataset* validation) {
  if (k < 1) throw ContractError("ensemble needs k >= 1");
  if (!(adv_epsilon >= 0.0)) throw ContractError("ensemble adversarial epsilon must be >= 0");
  Ensemble out;
  for (std::size_t i = 0; i < k; ++i) {
    TrainConfig member = cfg;
    member.seed = cfg.seed + i;
    LoopSpec spec;
    spec.objective = Objective::ensemble;
    spec.ensemble_epsilon = adv_epsilon;
    out.members.push_back(run_training(build_model(member, train), train, member, validation, nullptr, spec).model);
  }
  return out;
}

Ensemble temperature_scaled(const Model& model, const Dataset& validation) {
  std::vector<Scalar> logits;
  logits.reserve(validation.size() * model.classes());
  for (std::size_t begin = 0; begin < validation.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(begin + kEvalChunk, validation.size());
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor z = model.predict_logits(validation.gather(idx));
    logits.insert(logits.end(), z.data().begin(), z.data().end());
  }
  const Tensor all({validation.size(), model.classes()}, std::move(logits));
  return Ensemble{{model}, fit_temperature(all, validation.labels).temperature};
}

Ensemble train_predictor(const TrainConfig& cfg, const Dataset& train, const Dataset* validation,
                         bool temperature_scaling, TrainHistory* history) {
  if (cfg.mode == TrainMode::deep_ensemble) {
    if (temperature_scaling) throw ConfigError("temperature scaling applies to single models, not ensembles");
    return train_ensemble(cfg.ensemble_size, train, cfg, cfg.ensemble_epsilon, validation);
  }
  TrainResult result = cfg.mode == TrainMode::l2_baseline ? train_baseline(build_model(cfg, train), train, cfg, validation)
                                                           : train_falcon(build_model(cfg, train), train, cfg, validation);
  if (history) *history = std::move(result.history);
  if (temperature_scaling) {
    if (!validation) throw ConfigError("temperature scaling needs a validation split");
    return temperature_scaled(result.model, *validation);
  }
  return Ensemble{{std::move(result.model)}, 1.0};
}

std::vector<SensitivityRow> run_sensitivity(const TrainConfig& base, std::string_view parameter,
                                            const std::vector<double>& values, const Dataset& train,
                                            const Dataset& test, const ShiftSuite& suite, const Dataset* validation) {
  if (parameter != "lambda_s" && parameter != "lambda_adv") {
    throw ConfigError("sensitivity sweeps support lambda_s or lambda_adv, got '" + std::string(parameter) + "'");
  }
  std::vector<SensitivityRow> rows;
  for (double value : values) {
    TrainConfig cfg = base;
    (parameter == "lambda_s" ? cfg.lambda_s : cfg.lambda_adv) = value;
    const Ensemble predictor = train_predictor(cfg, train, validation, false);
    const auto eval = evaluate_under_shift(predictor, test, suite, cfg.num_bins);
    rows.push_back({value, eval.report.test_accuracy(), eval.report.mean_micro_ece()});
  }
  return rows;
}

}  // namespace falcon
