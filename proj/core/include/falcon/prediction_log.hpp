#pragma once

#include <filesystem>
#include <vector>

#include "falcon/metrics.hpp"

namespace falcon {

/// CSV with header
///   sample_id,perturbation,level,label,predicted,confidence,entropy,p_0,...,p_{C-1}
/// and one row per record; floats use 9 significant digits.
void write_prediction_log(const std::vector<PredictionRecord>& records, const std::filesystem::path& path);

/// Inverse of write_prediction_log. Throws IoError or FormatError.
std::vector<PredictionRecord> read_prediction_log(const std::filesystem::path& path);

}  // namespace falcon
