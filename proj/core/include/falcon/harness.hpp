#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "falcon/config.hpp"
#include "falcon/dataset.hpp"
#include "falcon/metrics.hpp"
#include "falcon/nn.hpp"

namespace falcon {

/// One optimizer iteration (minibatch). Terms a mode does not compute are absent.
struct HistoryRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double epsilon = 0.0;
  double l_cce = 0.0;
  std::optional<double> l_s;
  std::optional<double> l_adv;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
  std::vector<double> validation_accuracy;  // per completed epoch, when validating
  std::size_t epochs_run = 0;
  bool stopped_early = false;
};

/// Observation points inside a step: "clean" after the clean-batch backward,
/// "fgsm" once MB_adv exists, "adv" after the adversarial backward, "update"
/// after each optimizer step.
struct TrainHooks {
  std::function<void(std::string_view event, std::size_t step)> on_event;
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

/// Builds the preset named by cfg.model for the dataset's classes and sample shape.
Model build_model(const TrainConfig& cfg, const Dataset& data);

/// Per minibatch: sample eps from E; clean forward/backward of
/// L_CCE + lambda_S * entropy_scale * L_S; FGSM batch from the pre-update
/// parameters; optimizer step; then a second step on lambda_adv * L_adv over
/// the FGSM batch with batch-local binned accuracies. Steps whose weight is 0
/// (or that cfg.mode excludes) are skipped entirely. Throws DivergenceError
/// naming the step and loss term on a non-finite loss.
TrainResult train_falcon(Model model, const Dataset& train, const TrainConfig& cfg, const Dataset* validation = nullptr,
                         const TrainHooks* hooks = nullptr);

/// Plain CCE training with the configured dropout and L2 decay.
TrainResult train_baseline(Model model, const Dataset& train, const TrainConfig& cfg, const Dataset* validation = nullptr,
                           const TrainHooks* hooks = nullptr);

/// Averages member softmax outputs; each member's logits are divided by the
/// shared temperature first.
struct Ensemble {
  std::vector<Model> members;
  double temperature = 1.0;

  std::size_t classes() const { return members.front().classes(); }
  Tensor predict_probs(const Tensor& inputs) const;
  Tensor predict_logits(const Tensor& inputs) const;  // single-member only
};

/// k members with seeds cfg.seed + i, each trained on
/// CCE(MB) + CCE(FGSM(MB, adv_epsilon)) (the second term only when adv_epsilon > 0).
Ensemble train_ensemble(std::size_t k, const Dataset& train, const TrainConfig& cfg, double adv_epsilon,
                        const Dataset* validation = nullptr);

/// Fits T on the validation split and returns the model wrapped with it.
Ensemble temperature_scaled(const Model& model, const Dataset& validation);

struct CellMetrics {
  std::string perturbation;
  int level = 0;
  std::size_t n = 0;
  double accuracy = 0.0;
  double ece = 0.0;
  double mean_entropy = 0.0;
  double nll = 0.0;
  double mean_confidence = 0.0;
  std::vector<BinStatistics> bins;
};

struct CalibrationReport {
  std::string model_label;
  std::size_t num_bins = 10;
  std::vector<CellMetrics> cells;                             // (kind, level) in suite order
  std::vector<std::pair<std::string, double>> micro_ece;      // per perturbation, suite order
  CellMetrics in_domain;  // unperturbed test set, tagged "none" level 0
  nlohmann::json provenance = nlohmann::json::object();

  double test_accuracy() const { return in_domain.accuracy; }
  double in_domain_ece() const { return in_domain.ece; }
  /// ("none", 0) resolves to the in-domain cell.
  const CellMetrics* cell(std::string_view perturbation, int level) const;
  std::optional<double> micro(std::string_view perturbation) const;
  /// Mean micro-ECE over perturbations; in-domain ECE when the suite is empty.
  double mean_micro_ece() const;
};

struct ShiftSuite {
  std::vector<PerturbationKind> kinds;
  std::vector<int> levels = default_levels();
  PerturbationConfig ranges;
  std::uint64_t noise_seed = 0;

  static ShiftSuite from_config(const EvalConfig& eval);
};

struct Evaluation {
  CalibrationReport report;
  std::vector<PredictionRecord> records;  // clean test set first (tag "none"), then the suite
};

/// Runs the clean test set and every (kind, level) of the suite in eval mode
/// and assembles the report. Writes the prediction log when log_path is given.
/// Read-only on the predictor.
Evaluation evaluate_under_shift(const Ensemble& predictor, const Dataset& test, const ShiftSuite& suite,
                                std::size_t num_bins, const std::filesystem::path* log_path = nullptr);
Evaluation evaluate_under_shift(const Model& model, const Dataset& test, const ShiftSuite& suite, std::size_t num_bins,
                                const std::filesystem::path* log_path = nullptr);

/// Records for a dataset under one predictor, tagged with (perturbation, level).
std::vector<PredictionRecord> predict_records(const Ensemble& predictor, const Tensor& inputs, std::span<const int> labels,
                                              const std::string& perturbation, int level);

struct SensitivityRow {
  double value = 0.0;
  double accuracy = 0.0;
  double micro_ece = 0.0;
};

/// Retrains cfg for every value of `parameter` (lambda_s or lambda_adv) from
/// the same seed and evaluates on the suite. micro_ece is the mean over the
/// suite's perturbations (the in-domain ECE when the suite is empty).
std::vector<SensitivityRow> run_sensitivity(const TrainConfig& base, std::string_view parameter,
                                            const std::vector<double>& values, const Dataset& train,
                                            const Dataset& test, const ShiftSuite& suite,
                                            const Dataset* validation = nullptr);

/// Trains according to cfg.mode (ensembles and temperature scaling included).
Ensemble train_predictor(const TrainConfig& cfg, const Dataset& train, const Dataset* validation,
                         bool temperature_scaling, TrainHistory* history = nullptr);

}  // namespace falcon
