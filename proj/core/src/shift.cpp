#include "falcon/shift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "falcon/error.hpp"

namespace falcon {

namespace {
constexpr std::array<std::string_view, kPerturbationKinds> kNames = {
    "rotation", "x-shift", "y-shift", "x-zoom", "y-zoom", "shear", "gaussian-noise", "salt-pepper", "gaussian-blur"};
}

std::string_view to_string(PerturbationKind kind) { return kNames.at(static_cast<std::size_t>(kind)); }

PerturbationKind parse_perturbation_kind(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<PerturbationKind>(i);
  }
  throw RegistryError("unknown perturbation kind '" + std::string(name) + "'");
}

const std::array<PerturbationKind, kPerturbationKinds>& all_perturbation_kinds() {
  static const std::array<PerturbationKind, kPerturbationKinds> kinds = {
      PerturbationKind::rotation, PerturbationKind::x_shift,        PerturbationKind::y_shift,
      PerturbationKind::x_zoom,   PerturbationKind::y_zoom,         PerturbationKind::shear,
      PerturbationKind::gaussian_noise, PerturbationKind::salt_pepper, PerturbationKind::gaussian_blur};
  return kinds;
}

bool is_geometric(PerturbationKind kind) { return static_cast<std::size_t>(kind) <= 5; }

const std::vector<int>& default_levels() {
  static const std::vector<int> levels = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90};
  return levels;
}

PerturbationConfig PerturbationConfig::from_json(const nlohmann::json& j) {
  PerturbationConfig cfg;
  if (j.contains("schema_version") && j.at("schema_version") != 1) {
    throw SchemaError("unsupported perturbation config schema_version " + j.at("schema_version").dump());
  }
  if (!j.contains("ranges")) return cfg;
  for (const auto& [name, value] : j.at("ranges").items()) {
    const auto kind = parse_perturbation_kind(name);
    if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
      throw SchemaError("range for '" + name + "' must be [min, max]");
    }
    MagnitudeRange r{value[0].get<double>(), value[1].get<double>()};
    if (!(r.max_mag >= r.min_mag)) throw SchemaError("range for '" + name + "' has max below min");
    cfg.range(kind) = r;
  }
  return cfg;
}

nlohmann::json PerturbationConfig::to_json() const {
  nlohmann::json ranges_json = nlohmann::json::object();
  for (auto kind : all_perturbation_kinds()) {
    ranges_json[std::string(to_string(kind))] = {range(kind).min_mag, range(kind).max_mag};
  }
  return {{"schema_version", 1}, {"ranges", ranges_json}};
}

PerturbationSpec PerturbationSpec::make(PerturbationKind kind, int level, const PerturbationConfig& cfg) {
  const auto& r = cfg.range(kind);
  PerturbationSpec spec{kind, level, r.min_mag, r.max_mag};
  spec.validate();
  return spec;
}

void PerturbationSpec::validate() const {
  if (static_cast<std::size_t>(kind) >= kPerturbationKinds) throw RegistryError("unregistered perturbation kind");
  if (level < 0 || level > 90 || level % 10 != 0) {
    throw ContractError("perturbation level must be one of 0,10,...,90, got " + std::to_string(level));
  }
  if (!(max_mag >= min_mag)) throw ContractError("perturbation max_mag must be >= min_mag");
}

// Interpolation is defined on the whole range [0, 90]; the 10-step grid is only
// enforced where specs are built for evaluation.
double level_to_magnitude(const PerturbationSpec& spec) {
  if (static_cast<std::size_t>(spec.kind) >= kPerturbationKinds) throw RegistryError("unregistered perturbation kind");
  if (spec.level < 0 || spec.level > 90) throw ContractError("perturbation level must lie in [0, 90]");
  if (!(spec.max_mag >= spec.min_mag)) throw ContractError("perturbation max_mag must be >= min_mag");
  return spec.min_mag + (static_cast<double>(spec.level) / 90.0) * (spec.max_mag - spec.min_mag);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Inverse map: output pixel offset (dx, dy) from the centre -> source offset.
struct Affine {
  double a = 1, b = 0, c = 0, d = 1;  // [a b; c d] * (dx, dy)
  double tx = 0, ty = 0;
};

Affine inverse_map(PerturbationKind kind, double mag) {
  Affine m;
  switch (kind) {
    case PerturbationKind::rotation: {
      const double t = mag * std::numbers::pi / 180.0;
      m.a = std::cos(t);
      m.b = std::sin(t);
      m.c = -std::sin(t);
      m.d = std::cos(t);
      break;
    }
    case PerturbationKind::x_shift: m.tx = -mag; break;
    case PerturbationKind::y_shift: m.ty = -mag; break;
    case PerturbationKind::x_zoom: m.a = 1.0 / mag; break;
    case PerturbationKind::y_zoom: m.d = 1.0 / mag; break;
    case PerturbationKind::shear: m.b = -mag; break;
    default: break;
  }
  return m;
}

Tensor warp(const Tensor& image, const Affine& m) {
  const std::size_t h = image.dim(0), w = image.dim(1);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  const auto src = image.data();
  auto at = [&](long r, long c) -> double {
    if (r < 0 || c < 0 || r >= static_cast<long>(h) || c >= static_cast<long>(w)) return 0.0;
    return static_cast<double>(src[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)]);
  };
  std::vector<Scalar> out(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double dx = static_cast<double>(c) - cx, dy = static_cast<double>(r) - cy;
      const double sx = m.a * dx + m.b * dy + m.tx + cx;
      const double sy = m.c * dx + m.d * dy + m.ty + cy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double wx = sx - fx, wy = sy - fy;
      const auto x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      double v = (1 - wy) * ((1 - wx) * at(y0, x0) + (wx > 0 ? wx * at(y0, x0 + 1) : 0.0));
      if (wy > 0) v += wy * ((1 - wx) * at(y0 + 1, x0) + (wx > 0 ? wx * at(y0 + 1, x0 + 1) : 0.0));
      out[r * w + c] = static_cast<Scalar>(std::clamp(v, 0.0, 1.0));
    }
  }
  return Tensor(image.shape(), std::move(out));
}

Tensor blur(const Tensor& image, double sigma) {
  const std::size_t h = image.dim(0), w = image.dim(1);
  const long radius = std::max<long>(1, static_cast<long>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    total += kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
  }
  for (auto& k : kernel) k /= total;

  const auto src = image.data();
  std::vector<double> rows(h * w, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double v = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        const long cc = static_cast<long>(c) + k;
        if (cc >= 0 && cc < static_cast<long>(w)) v += kernel[static_cast<std::size_t>(k + radius)] * src[r * w + static_cast<std::size_t>(cc)];
      }
      rows[r * w + c] = v;
    }
  }
  std::vector<Scalar> out(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double v = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        const long rr = static_cast<long>(r) + k;
        if (rr >= 0 && rr < static_cast<long>(h)) v += kernel[static_cast<std::size_t>(k + radius)] * rows[static_cast<std::size_t>(rr) * w + c];
      }
      out[r * w + c] = static_cast<Scalar>(std::clamp(v, 0.0, 1.0));
    }
  }
  return Tensor(image.shape(), std::move(out));
}

}  // namespace

std::uint64_t perturbation_seed(std::uint64_t seed, PerturbationKind kind, int level, std::size_t sample) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
  h = splitmix64(h ^ static_cast<std::uint64_t>(level));
  return splitmix64(h ^ static_cast<std::uint64_t>(sample));
}

Tensor apply_perturbation(const Tensor& image, const PerturbationSpec& spec, std::uint64_t noise_seed) {
  if (image.rank() != 2) throw DimensionError("apply_perturbation expects an h x w image, got " + shape_string(image.shape()));
  const double mag = level_to_magnitude(spec);
  if (spec.level == 0) return image.detach();

  if (is_geometric(spec.kind)) {
    if ((spec.kind == PerturbationKind::x_zoom || spec.kind == PerturbationKind::y_zoom) && !(mag > 0.0)) {
      throw ContractError("zoom factor must be > 0");
    }
    return warp(image, inverse_map(spec.kind, mag));
  }

  if (spec.kind == PerturbationKind::gaussian_blur) return mag > 0.0 ? blur(image, mag) : image.detach();

  std::mt19937_64 rng(noise_seed);
  std::vector<Scalar> out(image.data().begin(), image.data().end());
  if (spec.kind == PerturbationKind::gaussian_noise) {
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& v : out) v = static_cast<Scalar>(std::clamp(static_cast<double>(v) + mag * noise(rng), 0.0, 1.0));
  } else {  // salt-pepper
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : out) {
      const double hit = u(rng), salt = u(rng);
      if (hit < mag) v = salt < 0.5 ? Scalar{0} : Scalar{1};
    }
  }
  return Tensor(image.shape(), std::move(out));
}

namespace {

Shape image_shape(const Dataset& data) {
  if (data.sample_shape.size() == 2) return data.sample_shape;
  if (data.sample_shape.size() == 3 && data.sample_shape[0] == 1) return {data.sample_shape[1], data.sample_shape[2]};
  throw DimensionError("perturbations need single-channel images, got samples of shape " + shape_string(data.sample_shape));
}

}  // namespace

void perturbation_suite(const Dataset& data, std::span<const PerturbationKind> kinds, std::span<const int> levels,
                        const PerturbationConfig& cfg, std::uint64_t seed,
                        const std::function<void(const SuiteItem&)>& visit) {
  const Shape shape = image_shape(data);
  const std::size_t d = shape_numel(shape);
  const auto src = data.inputs.data();
  for (auto kind : kinds) {
    for (int level : levels) {
      const auto spec = PerturbationSpec::make(kind, level, cfg);
      for (std::size_t i = 0; i < data.size(); ++i) {
        Tensor image(shape, std::vector<Scalar>(src.begin() + static_cast<std::ptrdiff_t>(i * d),
                                                src.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
        visit(SuiteItem{apply_perturbation(image, spec, perturbation_seed(seed, kind, level, i)), data.labels[i], kind,
                        level, i});
      }
    }
  }
}

Tensor perturb_dataset(const Dataset& data, PerturbationKind kind, int level, const PerturbationConfig& cfg,
                       std::uint64_t seed) {
  const std::size_t d = data.sample_dim();
  std::vector<Scalar> out(data.size() * d);
  const std::array<PerturbationKind, 1> kinds{kind};
  const std::array<int, 1> levels{level};
  perturbation_suite(data, kinds, levels, cfg, seed, [&](const SuiteItem& item) {
    std::copy(item.image.data().begin(), item.image.data().end(), out.begin() + static_cast<std::ptrdiff_t>(item.sample * d));
  });
  return Tensor({data.size(), d}, std::move(out));
}

}  // namespace falcon
