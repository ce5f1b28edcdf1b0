#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "falcon/dataset.hpp"

namespace falcon {

enum class PerturbationKind {
  rotation,
  x_shift,
  y_shift,
  x_zoom,
  y_zoom,
  shear,
  gaussian_noise,
  salt_pepper,
  gaussian_blur,
};

inline constexpr std::size_t kPerturbationKinds = 9;

std::string_view to_string(PerturbationKind kind);
/// Throws RegistryError for names outside the nine registered kinds.
PerturbationKind parse_perturbation_kind(std::string_view name);
const std::array<PerturbationKind, kPerturbationKinds>& all_perturbation_kinds();
bool is_geometric(PerturbationKind kind);

/// Relative strengths 0, 10, ..., 90.
const std::vector<int>& default_levels();

struct MagnitudeRange {
  double min_mag = 0.0;
  double max_mag = 0.0;
  bool operator==(const MagnitudeRange&) const = default;
};

/// Per-kind magnitude ranges. Units: degrees (rotation), pixels (shifts), scale
/// factor (zooms), shear coefficient, noise sigma, corrupted-pixel fraction,
/// blur sigma in pixels.
struct PerturbationConfig {
  std::array<MagnitudeRange, kPerturbationKinds> ranges = {{
      {0.0, 120.0},  // rotation
      {0.0, 14.0},   // x-shift
      {0.0, 14.0},   // y-shift
      {1.0, 3.0},    // x-zoom
      {1.0, 3.0},    // y-zoom
      {0.0, 1.2},    // shear
      {0.0, 0.9},    // gaussian-noise
      {0.0, 0.6},    // salt-pepper
      {0.0, 3.0},    // gaussian-blur
  }};

  const MagnitudeRange& range(PerturbationKind kind) const { return ranges[static_cast<std::size_t>(kind)]; }
  MagnitudeRange& range(PerturbationKind kind) { return ranges[static_cast<std::size_t>(kind)]; }

  /// {"schema_version": 1, "ranges": {"rotation": [0, 120], ...}}; kinds not
  /// named keep their defaults.
  static PerturbationConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  bool operator==(const PerturbationConfig&) const = default;
};

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::rotation;
  int level = 0;
  double min_mag = 0.0;
  double max_mag = 0.0;

  static PerturbationSpec make(PerturbationKind kind, int level, const PerturbationConfig& cfg = {});
  void validate() const;
};

/// min_mag + (level / 90) * (max_mag - min_mag).
double level_to_magnitude(const PerturbationSpec& spec);

/// Perturbs one h x w image with values in [0, 1]. Geometric kinds resample
/// bilinearly through the inverse map about the image centre, zero outside the
/// frame; noise kinds draw from `noise_seed`. Level 0 returns the input bit-exactly.
Tensor apply_perturbation(const Tensor& image, const PerturbationSpec& spec, std::uint64_t noise_seed = 0);

/// Seed for the noise of one (kind, level, sample) cell.
std::uint64_t perturbation_seed(std::uint64_t seed, PerturbationKind kind, int level, std::size_t sample);

struct SuiteItem {
  Tensor image;  // h x w
  int label = 0;
  PerturbationKind kind = PerturbationKind::rotation;
  int level = 0;
  std::size_t sample = 0;
};

/// Enumerates (kind, level, sample) in that nesting order.
void perturbation_suite(const Dataset& data, std::span<const PerturbationKind> kinds, std::span<const int> levels,
                        const PerturbationConfig& cfg, std::uint64_t seed,
                        const std::function<void(const SuiteItem&)>& visit);

/// The whole dataset under one (kind, level), as [n x D].
Tensor perturb_dataset(const Dataset& data, PerturbationKind kind, int level, const PerturbationConfig& cfg,
                       std::uint64_t seed);

}  // namespace falcon
