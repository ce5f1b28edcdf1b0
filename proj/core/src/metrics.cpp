#include "falcon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "falcon/error.hpp"
#include "falcon/ops.hpp"

namespace falcon {

PredictionRecord PredictionRecord::make(std::size_t sample_id, std::vector<double> probs, int label,
                                        std::string perturbation, int level) {
  PredictionRecord r;
  r.sample_id = sample_id;
  r.predicted = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  r.probs = std::move(probs);
  r.label = label;
  r.perturbation = std::move(perturbation);
  r.level = level;
  return r;
}

double PredictionRecord::confidence() const {
  if (probs.empty()) throw ContractError("prediction record has no probabilities");
  return *std::max_element(probs.begin(), probs.end());
}

void PredictionRecord::validate() const {
  const std::string id = "record " + std::to_string(sample_id);
  if (probs.size() < 2) throw ContractError(id + ": needs at least 2 class probabilities");
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) throw ContractError(id + ": probabilities sum to " + std::to_string(total));
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) throw ContractError(id + ": label out of range");
  if (probs[static_cast<std::size_t>(predicted)] != confidence()) throw ContractError(id + ": predicted is not argmax");
  if (level < 0 || level > 90 || level % 10 != 0) throw ContractError(id + ": level must be one of 0,10,...,90");
}

std::size_t bin_index(double confidence, std::size_t num_bins) {
  if (num_bins < 1) throw ContractError("number of bins must be >= 1");
  const double m_total = static_cast<double>(num_bins);
  if (!(confidence > 0.0)) return 1;
  auto m = static_cast<std::size_t>(std::clamp(std::ceil(confidence * m_total), 1.0, m_total));
  // ceil(c*M) can land one bin off when c sits on an edge; settle against the
  // edges themselves so membership agrees with c in ((m-1)/M, m/M].
  while (m > 1 && confidence <= static_cast<double>(m - 1) / m_total) --m;
  while (m < num_bins && confidence > static_cast<double>(m) / m_total) ++m;
  return m;
}

std::vector<BinStatistics> bin_predictions(std::span<const PredictionRecord> records, std::size_t num_bins) {
  if (records.empty()) throw ContractError("cannot bin an empty record list");
  if (num_bins < 1) throw ContractError("number of bins must be >= 1");
  std::vector<BinStatistics> bins(num_bins);
  std::vector<double> conf_sum(num_bins, 0.0), correct(num_bins, 0.0);
  for (std::size_t m = 0; m < num_bins; ++m) {
    bins[m].index = m + 1;
    bins[m].lower = static_cast<double>(m) / static_cast<double>(num_bins);
    bins[m].upper = static_cast<double>(m + 1) / static_cast<double>(num_bins);
  }
  for (const auto& r : records) {
    const double c = r.confidence();
    const std::size_t m = bin_index(c, num_bins) - 1;
    ++bins[m].count;
    conf_sum[m] += c;
    correct[m] += r.correct() ? 1.0 : 0.0;
  }
  for (std::size_t m = 0; m < num_bins; ++m) {
    if (bins[m].count == 0) continue;
    const auto n = static_cast<double>(bins[m].count);
    bins[m].avg_confidence = conf_sum[m] / n;
    bins[m].avg_accuracy = correct[m] / n;
  }
  return bins;
}

double ece(std::span<const PredictionRecord> records, std::size_t num_bins) {
  const auto bins = bin_predictions(records, num_bins);
  const auto n = static_cast<double>(records.size());
  double total = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    total += static_cast<double>(b.count) / n * std::abs(*b.avg_accuracy - *b.avg_confidence);
  }
  return total;
}

double micro_averaged_ece(std::span<const PredictionRecord> records, std::size_t num_bins) {
  if (records.empty()) throw ContractError("cannot pool an empty record list");
  const auto& tag = records.front().perturbation;
  for (const auto& r : records) {
    if (r.perturbation != tag) {
      throw ContractError("micro-averaged ECE needs one perturbation, got '" + tag + "' and '" + r.perturbation + "'");
    }
  }
  return ece(records, num_bins);
}

double predictive_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

double nll(std::span<const PredictionRecord> records) {
  if (records.empty()) throw ContractError("nll of an empty record list");
  double total = 0.0;
  for (const auto& r : records) {
    total -= std::log(std::max(r.probs.at(static_cast<std::size_t>(r.label)), kClampDelta));
  }
  return total / static_cast<double>(records.size());
}

namespace {
template <class F>
double mean_of(std::span<const PredictionRecord> records, F f, const char* what) {
  if (records.empty()) throw ContractError(std::string(what) + " of an empty record list");
  double total = 0.0;
  for (const auto& r : records) total += f(r);
  return total / static_cast<double>(records.size());
}
}  // namespace

double accuracy(std::span<const PredictionRecord> records) {
  return mean_of(records, [](const PredictionRecord& r) { return r.correct() ? 1.0 : 0.0; }, "accuracy");
}

double mean_confidence(std::span<const PredictionRecord> records) {
  return mean_of(records, [](const PredictionRecord& r) { return r.confidence(); }, "mean confidence");
}

double mean_entropy(std::span<const PredictionRecord> records) {
  return mean_of(records, [](const PredictionRecord& r) { return predictive_entropy(r.probs); }, "mean entropy");
}

double temperature_nll(const Tensor& logits, std::span<const int> labels, double temperature) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  const auto z = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = z.subspan(i * c, c);
    const double peak = *std::max_element(row.begin(), row.end()) / temperature;
    double norm = 0.0;
    for (Scalar v : row) norm += std::exp(v / temperature - peak);
    total += peak + std::log(norm) - row[static_cast<std::size_t>(labels[i])] / temperature;
  }
  return total / static_cast<double>(n);
}

TemperatureScaler fit_temperature(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw DimensionError("fit_temperature expects [n x C] logits, got " + shape_string(logits.shape()));
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw DimensionError("fit_temperature: " + std::to_string(labels.size()) + " labels for " +
                                               std::to_string(n) + " logit rows");
  if (n < c) throw FitError("temperature fit needs at least as many samples as classes");
  if (!logits.all_finite()) throw FitError("temperature fit needs finite logits");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) throw ContractError("label out of range in temperature fit");
  }
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw FitError("temperature fit needs labels from at least two classes");
  }

  // Golden-section search on u = log T; NLL is unimodal in T for fixed logits.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(kMinTemperature), hi = std::log(kMaxTemperature);
  auto f = [&](double u) { return temperature_nll(logits, labels, std::exp(u)); };
  double a = hi - inv_phi * (hi - lo), b = lo + inv_phi * (hi - lo);
  double fa = f(a), fb = f(b);
  while (hi - lo > 1e-7) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = f(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = f(b);
    }
  }
  return TemperatureScaler{std::exp(0.5 * (lo + hi))};
}

Tensor apply_temperature(const TemperatureScaler& scaler, const Tensor& logits) {
  if (!(scaler.temperature > 0.0) || !std::isfinite(scaler.temperature)) {
    throw ContractError("temperature must be finite and > 0");
  }
  NoGradGuard no_grad;
  return ops::softmax_rows(ops::scale(logits.detach(), static_cast<Scalar>(1.0 / scaler.temperature)));
}

}  // namespace falcon
