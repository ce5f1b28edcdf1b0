#include "falcon/harness.hpp"

#include <algorithm>
#include <numeric>

#include "falcon/error.hpp"
#include "falcon/prediction_log.hpp"

namespace falcon {

const CellMetrics* CalibrationReport::cell(std::string_view perturbation, int level) const {
  if (perturbation == "none" && level == 0) return &in_domain;
  for (const auto& c : cells) {
    if (c.perturbation == perturbation && c.level == level) return &c;
  }
  return nullptr;
}

std::optional<double> CalibrationReport::micro(std::string_view perturbation) const {
  for (const auto& [name, value] : micro_ece) {
    if (name == perturbation) return value;
  }
  return std::nullopt;
}

double CalibrationReport::mean_micro_ece() const {
  if (micro_ece.empty()) return in_domain.ece;
  double total = 0.0;
  for (const auto& [_, value] : micro_ece) total += value;
  return total / static_cast<double>(micro_ece.size());
}

ShiftSuite ShiftSuite::from_config(const EvalConfig& eval) {
  ShiftSuite suite;
  for (const auto& name : eval.perturbations) suite.kinds.push_back(parse_perturbation_kind(name));
  suite.levels = eval.levels;
  suite.ranges = eval.ranges;
  suite.noise_seed = eval.noise_seed;
  return suite;
}

std::vector<PredictionRecord> predict_records(const Ensemble& predictor, const Tensor& inputs, std::span<const int> labels,
                                              const std::string& perturbation, int level) {
  constexpr std::size_t chunk = 512;
  const std::size_t n = inputs.dim(0), d = inputs.numel() / std::max<std::size_t>(n, 1);
  if (labels.size() != n) throw DimensionError("predict_records: labels do not match inputs");
  std::vector<PredictionRecord> records;
  records.reserve(n);
  const auto src = inputs.data();
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(begin + chunk, n);
    const Tensor batch({end - begin, d}, std::vector<Scalar>(src.begin() + static_cast<std::ptrdiff_t>(begin * d),
                                                             src.begin() + static_cast<std::ptrdiff_t>(end * d)));
    const Tensor probs = predictor.predict_probs(batch);
    const std::size_t c = probs.dim(1);
    for (std::size_t i = 0; i < end - begin; ++i) {
      std::vector<double> p(c);
      for (std::size_t j = 0; j < c; ++j) p[j] = static_cast<double>(probs[i * c + j]);
      records.push_back(PredictionRecord::make(begin + i, std::move(p), labels[begin + i], perturbation, level));
    }
  }
  return records;
}

namespace {

CellMetrics summarize(std::span<const PredictionRecord> records, std::size_t num_bins) {
  CellMetrics m;
  m.perturbation = records.front().perturbation;
  m.level = records.front().level;
  m.n = records.size();
  m.accuracy = accuracy(records);
  m.ece = ece(records, num_bins);
  m.mean_entropy = mean_entropy(records);
  m.nll = nll(records);
  m.mean_confidence = mean_confidence(records);
  m.bins = bin_predictions(records, num_bins);
  return m;
}

}  // namespace

Evaluation evaluate_under_shift(const Ensemble& predictor, const Dataset& test, const ShiftSuite& suite,
                                std::size_t num_bins, const std::filesystem::path* log_path) {
  test.validate();
  if (num_bins < 1) throw ContractError("number of bins must be >= 1");
  Evaluation out;
  auto& report = out.report;
  report.num_bins = num_bins;

  auto clean = predict_records(predictor, test.inputs, test.labels, "none", 0);
  report.in_domain = summarize(clean, num_bins);
  out.records = std::move(clean);

  for (auto kind : suite.kinds) {
    const std::string tag(to_string(kind));
    const std::size_t first = out.records.size();
    for (int level : suite.levels) {
      try {
        const Tensor shifted = perturb_dataset(test, kind, level, suite.ranges, suite.noise_seed);
        auto records = predict_records(predictor, shifted, test.labels, tag, level);
        report.cells.push_back(summarize(records, num_bins));
        out.records.insert(out.records.end(), std::make_move_iterator(records.begin()),
                           std::make_move_iterator(records.end()));
      } catch (const Error& e) {
        throw Error(tag + " level " + std::to_string(level) + ": " + e.what());
      }
    }
    if (out.records.size() > first) {
      const std::span<const PredictionRecord> pooled(out.records.data() + first, out.records.size() - first);
      report.micro_ece.emplace_back(tag, micro_averaged_ece(pooled, num_bins));
    }
  }

  if (log_path) write_prediction_log(out.records, *log_path);
  return out;
}

Evaluation evaluate_under_shift(const Model& model, const Dataset& test, const ShiftSuite& suite, std::size_t num_bins,
                                const std::filesystem::path* log_path) {
  return evaluate_under_shift(Ensemble{{model}, 1.0}, test, suite, num_bins, log_path);
}

}  // namespace falcon
