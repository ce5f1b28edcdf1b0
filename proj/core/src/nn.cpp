#include "falcon/nn.hpp"

#include <algorithm>
#include <cmath>

#include "falcon/error.hpp"
#include "falcon/ops.hpp"

namespace falcon {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::maxpool2d: return "maxpool2d";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (auto kind : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu, LayerKind::dropout, LayerKind::flatten,
                    LayerKind::maxpool2d}) {
    if (to_string(kind) == name) return kind;
  }
  throw RegistryError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec spec;
  spec.kind = LayerKind::dense;
  spec.units = units;
  return spec;
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t kernel, std::size_t stride) {
  LayerSpec spec;
  spec.kind = LayerKind::conv2d;
  spec.filters = filters;
  spec.kernel = kernel;
  spec.stride = stride;
  return spec;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec spec;
  spec.kind = LayerKind::dropout;
  spec.rate = rate;
  return spec;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec spec;
  spec.kind = LayerKind::flatten;
  return spec;
}

LayerSpec LayerSpec::maxpool2d(std::size_t size) {
  LayerSpec spec;
  spec.kind = LayerKind::maxpool2d;
  spec.kernel = size;
  spec.stride = size;
  return spec;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::dense:
      if (units < 1) throw ContractError("dense layer needs units >= 1");
      break;
    case LayerKind::conv2d:
      if (filters < 1) throw ContractError("conv2d layer needs filters >= 1");
      if (kernel < 1 || kernel % 2 == 0) throw ContractError("conv2d kernel must be odd and >= 1");
      if (stride < 1) throw ContractError("conv2d stride must be >= 1");
      break;
    case LayerKind::dropout:
      if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
      break;
    case LayerKind::maxpool2d:
      if (kernel < 1 || stride < 1) throw ContractError("maxpool2d window and stride must be >= 1");
      break;
    case LayerKind::relu:
    case LayerKind::flatten:
      break;
  }
}

Architecture make_preset(std::string_view name, std::size_t classes, double dropout, Shape input_shape) {
  Architecture arch;
  arch.name = std::string(name);
  arch.classes = classes;
  if (name == "mlp-small") {
    arch.input_shape = input_shape.empty() ? Shape{784} : Shape{shape_numel(input_shape)};
    arch.layers = {LayerSpec::dense(128), LayerSpec::relu(), LayerSpec::dropout(dropout),
                   LayerSpec::dense(128), LayerSpec::relu(), LayerSpec::dropout(dropout),
                   LayerSpec::dense(classes)};
  } else if (name == "lenet-like") {
    arch.input_shape = input_shape.empty() ? Shape{1, 28, 28} : input_shape;
    arch.layers = {LayerSpec::conv2d(8, 5),    LayerSpec::relu(),        LayerSpec::maxpool2d(2),
                   LayerSpec::conv2d(16, 5),   LayerSpec::relu(),        LayerSpec::maxpool2d(2),
                   LayerSpec::flatten(),       LayerSpec::dense(128),    LayerSpec::relu(),
                   LayerSpec::dropout(dropout), LayerSpec::dense(classes)};
  } else if (name == "mlp-tiny") {
    arch.input_shape = input_shape.empty() ? Shape{2} : Shape{shape_numel(input_shape)};
    arch.layers = {LayerSpec::dense(64), LayerSpec::relu(), LayerSpec::dense(64), LayerSpec::relu(),
                   LayerSpec::dense(classes)};
    if (dropout > 0.0) arch.layers.insert(arch.layers.begin() + 4, LayerSpec::dropout(dropout));
  } else {
    throw RegistryError("unknown model preset '" + std::string(name) + "'");
  }
  return arch;
}

namespace {

// Walks the layer stack, returning the per-sample output shape and collecting
// parameter shapes. Throws DimensionError when consecutive layers do not compose.
Shape infer_shapes(const Architecture& arch, std::vector<Shape>* param_shapes, std::vector<std::size_t>* fan_in) {
  Shape current = arch.input_shape;
  if (current.empty() || shape_numel(current) == 0) throw DimensionError("model input shape must be non-empty");
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& layer = arch.layers[i];
    layer.validate();
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(layer.kind)) + ")";
    switch (layer.kind) {
      case LayerKind::dense:
        if (current.size() != 1) {
          throw DimensionError(where + " needs a flat input, got " + shape_string(current) + "; add a flatten layer");
        }
        if (param_shapes) {
          param_shapes->push_back({current[0], layer.units});
          param_shapes->push_back({layer.units});
          fan_in->push_back(current[0]);
        }
        current = {layer.units};
        break;
      case LayerKind::conv2d: {
        if (current.size() != 3) throw DimensionError(where + " needs a c x h x w input, got " + shape_string(current));
        const std::size_t pad = layer.kernel / 2;
        if (param_shapes) {
          param_shapes->push_back({layer.filters, current[0], layer.kernel, layer.kernel});
          param_shapes->push_back({layer.filters});
          fan_in->push_back(current[0] * layer.kernel * layer.kernel);
        }
        current = {layer.filters, (current[1] + 2 * pad - layer.kernel) / layer.stride + 1,
                   (current[2] + 2 * pad - layer.kernel) / layer.stride + 1};
        break;
      }
      case LayerKind::maxpool2d:
        if (current.size() != 3 || current[1] < layer.kernel || current[2] < layer.kernel) {
          throw DimensionError(where + " cannot pool input " + shape_string(current));
        }
        current = {current[0], (current[1] - layer.kernel) / layer.stride + 1,
                   (current[2] - layer.kernel) / layer.stride + 1};
        break;
      case LayerKind::flatten:
        current = {shape_numel(current)};
        break;
      case LayerKind::relu:
      case LayerKind::dropout:
        break;
    }
  }
  return current;
}

bool feeds_relu(const std::vector<LayerSpec>& layers, std::size_t index) {
  for (std::size_t j = index + 1; j < layers.size(); ++j) {
    if (layers[j].kind == LayerKind::relu) return true;
    if (layers[j].has_parameters()) return false;
  }
  return false;
}

}  // namespace

Model::Model(Architecture arch, std::uint64_t seed) : arch_(std::move(arch)), seed_(seed), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  if (arch_.classes < 2) throw ContractError("a classifier needs at least 2 classes");
  std::vector<Shape> shapes;
  std::vector<std::size_t> fan_in;
  const Shape out = infer_shapes(arch_, &shapes, &fan_in);
  if (out != Shape{arch_.classes}) {
    throw DimensionError("model output shape " + shape_string(out) + " does not match " +
                         std::to_string(arch_.classes) + " classes");
  }

  Rng init(seed);
  std::size_t param_layer = 0;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    if (!arch_.layers[i].has_parameters()) continue;
    const double gain = feeds_relu(arch_.layers, i) ? 6.0 : 3.0;
    const double bound = std::sqrt(gain / static_cast<double>(fan_in[param_layer]));
    std::uniform_real_distribution<double> draw(-bound, bound);
    Tensor weight = Tensor::zeros(shapes[2 * param_layer], true);
    for (auto& w : weight.mutable_data()) w = static_cast<Scalar>(draw(init));
    params_.push_back(std::move(weight));
    params_.push_back(Tensor::zeros(shapes[2 * param_layer + 1], true));
    ++param_layer;
  }
}

Model::Model(const Model& other)
    : arch_(other.arch_), seed_(other.seed_), training_(other.training_), dropout_rng_(other.dropout_rng_) {
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) params_.push_back(p.clone());
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor Model::forward(const Tensor& batch) { return run(batch, training_, &dropout_rng_); }

Tensor Model::predict_logits(const Tensor& batch) const {
  NoGradGuard no_grad;
  return run(batch, false, nullptr);
}

Tensor Model::predict_probs(const Tensor& batch) const { return softmax(predict_logits(batch)); }

Tensor Model::run(const Tensor& batch, bool training, Rng* rng) const {
  const std::size_t d = input_dim();
  if (batch.rank() == 0 || batch.numel() == 0 || batch.numel() % d != 0 || batch.numel() / d != batch.dim(0)) {
    throw DimensionError("model expects inputs of shape [b x " + std::to_string(d) + "], got " +
                         shape_string(batch.shape()));
  }
  const std::size_t b = batch.dim(0);
  Shape full{b};
  full.insert(full.end(), arch_.input_shape.begin(), arch_.input_shape.end());
  Tensor x = batch.shape() == full ? batch : ops::reshape(batch, full);

  std::size_t p = 0;
  for (const auto& layer : arch_.layers) {
    switch (layer.kind) {
      case LayerKind::dense:
        x = ops::add_bias(ops::matmul(x, params_[p]), params_[p + 1]);
        p += 2;
        break;
      case LayerKind::conv2d:
        x = ops::conv2d(x, params_[p], params_[p + 1], layer.stride, layer.kernel / 2);
        p += 2;
        break;
      case LayerKind::relu:
        x = ops::relu(x);
        break;
      case LayerKind::dropout: {
        if (!training || layer.rate == 0.0) break;
        const auto keep = static_cast<Scalar>(1.0 / (1.0 - layer.rate));
        std::vector<Scalar> mask(x.numel());
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto& m : mask) m = u(*rng) >= layer.rate ? keep : Scalar{0};
        x = ops::mul(x, Tensor(x.shape(), std::move(mask)));
        break;
      }
      case LayerKind::flatten:
        x = ops::reshape(x, {b, x.numel() / b});
        break;
      case LayerKind::maxpool2d:
        x = ops::maxpool2d(x, layer.kernel, layer.stride);
        break;
    }
  }
  return x;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

std::vector<Scalar> Model::flat_parameters() const {
  std::vector<Scalar> flat;
  flat.reserve(parameter_count());
  for (const auto& p : params_) flat.insert(flat.end(), p.data().begin(), p.data().end());
  return flat;
}

void Model::set_flat_parameters(std::span<const Scalar> values) {
  if (values.size() != parameter_count()) {
    throw DimensionError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                         std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (auto& p : params_) {
    auto dst = p.mutable_data();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
    offset += dst.size();
  }
}

void Model::set_requires_grad(bool on) {
  for (auto& p : params_) p.set_requires_grad(on);
}

void Model::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Model::clear_grad() {
  for (auto& p : params_) p.clear_grad();
}

Tensor softmax(const Tensor& logits) { return ops::softmax_rows(logits); }

std::vector<int> argmax_rows(const Tensor& probs) {
  if (probs.rank() != 2) throw DimensionError("argmax_rows expects a matrix, got " + shape_string(probs.shape()));
  const std::size_t rows = probs.dim(0), cols = probs.dim(1);
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = probs.data().subspan(r * cols, cols);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace falcon
