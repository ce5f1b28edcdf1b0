#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falcon/tensor.hpp"

namespace falcon {

/// One evaluated sample. Confidence is the largest entry of probs.
struct PredictionRecord {
  std::size_t sample_id = 0;
  std::vector<double> probs;
  int predicted = 0;
  int label = 0;
  std::string perturbation = "none";
  int level = 0;

  /// Builds a record, taking predicted = argmax(probs).
  static PredictionRecord make(std::size_t sample_id, std::vector<double> probs, int label,
                               std::string perturbation = "none", int level = 0);

  double confidence() const;
  bool correct() const { return predicted == label; }
  /// Throws ContractError on a malformed record.
  void validate() const;
};

/// 1-based bin of a confidence among M equal bins, bin m covering ((m-1)/M, m/M].
/// Confidence 0 goes to bin 1.
std::size_t bin_index(double confidence, std::size_t num_bins);

struct BinStatistics {
  std::size_t index = 1;  // m, 1-based
  double lower = 0.0;
  double upper = 1.0;
  std::size_t count = 0;
  std::optional<double> avg_confidence;  // absent for empty bins
  std::optional<double> avg_accuracy;
};

std::vector<BinStatistics> bin_predictions(std::span<const PredictionRecord> records, std::size_t num_bins);

/// sum_m |B_m|/n * |acc(B_m) - conf(B_m)|.
double ece(std::span<const PredictionRecord> records, std::size_t num_bins);

/// ECE of all levels of one perturbation pooled together. Throws ContractError
/// when records carry more than one perturbation tag.
double micro_averaged_ece(std::span<const PredictionRecord> records, std::size_t num_bins);

/// -sum p ln p with 0 ln 0 = 0.
double predictive_entropy(std::span<const double> probs);

/// Mean -ln p(label), clamped at kClampDelta.
double nll(std::span<const PredictionRecord> records);

double accuracy(std::span<const PredictionRecord> records);
double mean_confidence(std::span<const PredictionRecord> records);
double mean_entropy(std::span<const PredictionRecord> records);

struct TemperatureScaler {
  double temperature = 1.0;
};

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;

/// Minimizes validation NLL of softmax(logits / T) over T in [0.05, 20] by
/// golden-section search in log T. Throws FitError when the labels hold a single
/// class or there are fewer samples than classes.
TemperatureScaler fit_temperature(const Tensor& logits, std::span<const int> labels);

/// softmax(logits / T), not recorded.
Tensor apply_temperature(const TemperatureScaler& scaler, const Tensor& logits);

/// NLL of softmax(logits / T) against labels, evaluated in double precision.
double temperature_nll(const Tensor& logits, std::span<const int> labels, double temperature);

}  // namespace falcon
