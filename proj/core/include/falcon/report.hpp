#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "falcon/harness.hpp"

namespace falcon {

inline constexpr int kReportSchemaVersion = 1;

nlohmann::json report_to_json(const CalibrationReport& report);
/// Throws SchemaError when the document does not match the report schema.
CalibrationReport report_from_json(const nlohmann::json& j);
void validate_report_json(const nlohmann::json& j);

/// Fixed-format dump (sorted keys, 2-space indent, trailing newline).
std::string dump_report(const CalibrationReport& report);
CalibrationReport read_report(const std::filesystem::path& path);

/// One row per (model, perturbation): model,perturbation,micro_ece,test_accuracy,in_domain_ece.
std::string comparison_csv(const std::vector<CalibrationReport>& reports);

/// Training history as CSV: step,epoch,epsilon,l_cce,l_s,l_adv (absent terms empty).
std::string history_csv(const TrainHistory& history);

// SVG 1.1 renderings. Provenance (config snapshot and seed) is embedded in a
// <metadata> element; no paths or timestamps appear in the output.
std::string svg_ece_vs_level(const std::vector<CalibrationReport>& reports);
std::string svg_reliability(const CalibrationReport& report, const std::string& perturbation, int level);
std::string svg_micro_ece_bars(const std::vector<CalibrationReport>& reports);

}  // namespace falcon
