#include "falcon/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "falcon/error.hpp"

namespace falcon::ops {

namespace {

using detail::NodePtr;
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

constexpr auto kDelta = static_cast<Scalar>(kClampDelta);

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!GradMode::enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void record(const char* name, std::vector<NodePtr> inputs, const Tensor& out, std::function<void()> fn) {
  Tape::active().record(Tape::Record{name, std::move(inputs), out.node(), std::move(fn)});
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a, b);
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(x.shape()));
  }
}

// Elementwise unary op with derivative expressed through (input, output).
template <class Forward, class Derivative>
Tensor unary(const char* name, const Tensor& x, Forward f, Derivative df) {
  std::vector<Scalar> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  const bool rec = recording({&x});
  Tensor result(x.shape(), std::move(out), rec);
  if (rec) {
    record(name, {x.node()}, result, [xn = x.node(), on = result.node(), df]() {
      auto& gx = xn->ensure_grad();
      const auto& g = on->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xn->data[i], on->data[i]);
    });
  }
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  const bool rec = recording({&a, &b});
  Tensor result(a.shape(), std::move(out), rec);
  if (rec) {
    record("add", {a.node(), b.node()}, result, [an = a.node(), bn = b.node(), on = result.node()]() {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto& ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  const bool rec = recording({&a, &b});
  Tensor result(a.shape(), std::move(out), rec);
  if (rec) {
    record("sub", {a.node(), b.node()}, result, [an = a.node(), bn = b.node(), on = result.node()]() {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto& ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const bool rec = recording({&a, &b});
  Tensor result(a.shape(), std::move(out), rec);
  if (rec) {
    record("mul", {a.node(), b.node()}, result, [an = a.node(), bn = b.node(), on = result.node()]() {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto& ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->data[i];
      }
    });
  }
  return result;
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  std::vector<Scalar> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / std::max(b[i], kDelta);
  const bool rec = recording({&a, &b});
  Tensor result(a.shape(), std::move(out), rec);
  if (rec) {
    record("div", {a.node(), b.node()}, result, [an = a.node(), bn = b.node(), on = result.node()]() {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto& ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / std::max(bn->data[i], kDelta);
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const Scalar d = bn->data[i];
          if (d > kDelta) gb[i] -= g[i] * an->data[i] / (d * d);
        }
      }
    });
  }
  return result;
}

Tensor add_scalar(const Tensor& a, Scalar c) {
  return unary("add_scalar", a, [c](Scalar v) { return v + c; }, [](Scalar, Scalar) { return Scalar{1}; });
}

Tensor scale(const Tensor& a, Scalar c) {
  return unary("scale", a, [c](Scalar v) { return v * c; }, [c](Scalar, Scalar) { return c; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank("add_bias", x, 2);
  if (bias.numel() != x.dim(1)) shape_mismatch("add_bias", x, bias);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<Scalar> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] + bias[c];
  const bool rec = recording({&x, &bias});
  Tensor result(x.shape(), std::move(out), rec);
  if (rec) {
    record("add_bias", {x.node(), bias.node()}, result,
           [xn = x.node(), bn = bias.node(), on = result.node(), rows, cols]() {
             const auto& g = on->grad;
             if (xn->requires_grad) {
               auto& gx = xn->ensure_grad();
               for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
             }
             if (bn->requires_grad) {
               auto& gb = bn->ensure_grad();
               for (std::size_t r = 0; r < rows; ++r)
                 for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
             }
           });
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_mismatch("matmul", a, b);
  const auto r = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto c = static_cast<Eigen::Index>(b.dim(1));
  std::vector<Scalar> out(static_cast<std::size_t>(r * c));
  MatrixMap(out.data(), r, c).noalias() = ConstMatrixMap(a.data().data(), r, k) * ConstMatrixMap(b.data().data(), k, c);
  const bool rec = recording({&a, &b});
  Tensor result(Shape{a.dim(0), b.dim(1)}, std::move(out), rec);
  if (rec) {
    record("matmul", {a.node(), b.node()}, result, [an = a.node(), bn = b.node(), on = result.node(), r, k, c]() {
      ConstMatrixMap g(on->grad.data(), r, c);
      if (an->requires_grad) {
        MatrixMap(an->ensure_grad().data(), r, k).noalias() += g * ConstMatrixMap(bn->data.data(), k, c).transpose();
      }
      if (bn->requires_grad) {
        MatrixMap(bn->ensure_grad().data(), k, c).noalias() += ConstMatrixMap(an->data.data(), r, k).transpose() * g;
      }
    });
  }
  return result;
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](Scalar v) { return v > 0 ? v : Scalar{0}; },
      [](Scalar in, Scalar) { return in > 0 ? Scalar{1} : Scalar{0}; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](Scalar v) { return std::exp(v); }, [](Scalar, Scalar out) { return out; });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](Scalar v) { return std::log(std::max(v, kDelta)); },
      [](Scalar in, Scalar) { return in > kDelta ? Scalar{1} / in : Scalar{0}; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      "sqrt", x, [](Scalar v) { return std::sqrt(std::max(v, Scalar{0})); },
      [](Scalar, Scalar out) { return out > 0 ? Scalar{0.5} / out : Scalar{0}; });
}

Tensor sum(const Tensor& x) {
  Scalar total = 0;
  for (Scalar v : x.data()) total += v;
  const bool rec = recording({&x});
  Tensor result(Shape{}, {total}, rec);
  if (rec) {
    record("sum", {x.node()}, result, [xn = x.node(), on = result.node()]() {
      auto& gx = xn->ensure_grad();
      const Scalar g = on->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return result;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), Scalar{1} / static_cast<Scalar>(x.numel()));
}

Tensor sum_rows(const Tensor& x) {
  require_rank("sum_rows", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<Scalar> out(rows, Scalar{0});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += x[r * cols + c];
  const bool rec = recording({&x});
  Tensor result(Shape{rows}, std::move(out), rec);
  if (rec) {
    record("sum_rows", {x.node()}, result, [xn = x.node(), on = result.node(), rows, cols]() {
      auto& gx = xn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += on->grad[r];
    });
  }
  return result;
}

Tensor max_rows(const Tensor& x) {
  require_rank("max_rows", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (cols == 0) throw DimensionError("max_rows: zero columns in " + shape_string(x.shape()));
  std::vector<Scalar> out(rows);
  std::vector<std::size_t> arg(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (x[r * cols + c] > x[r * cols + best]) best = c;
    arg[r] = best;
    out[r] = x[r * cols + best];
  }
  const bool rec = recording({&x});
  Tensor result(Shape{rows}, std::move(out), rec);
  if (rec) {
    record("max_rows", {x.node()}, result, [xn = x.node(), on = result.node(), arg = std::move(arg), cols]() {
      auto& gx = xn->ensure_grad();
      for (std::size_t r = 0; r < arg.size(); ++r) gx[r * cols + arg[r]] += on->grad[r];
    });
  }
  return result;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank("softmax_rows", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<Scalar> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* in = x.data().data() + r * cols;
    Scalar* o = out.data() + r * cols;
    const Scalar peak = *std::max_element(in, in + cols);
    Scalar total = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - peak);
      total += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  const bool rec = recording({&x});
  Tensor result(x.shape(), std::move(out), rec);
  if (rec) {
    record("softmax_rows", {x.node()}, result, [xn = x.node(), on = result.node(), rows, cols]() {
      auto& gx = xn->ensure_grad();
      const auto& y = on->data;
      const auto& g = on->grad;
      for (std::size_t r = 0; r < rows; ++r) {
        Scalar dot = 0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
      }
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  const bool rec = recording({&x});
  Tensor result(std::move(shape), std::vector<Scalar>(x.data().begin(), x.data().end()), rec);
  if (rec) {
    record("reshape", {x.node()}, result, [xn = x.node(), on = result.node()]() {
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i];
    });
  }
  return result;
}

namespace {

struct ConvGeometry {
  std::size_t batch, in_ch, height, width, out_ch, kernel, stride, padding, out_h, out_w;
  std::size_t patch() const { return in_ch * kernel * kernel; }
  std::size_t positions() const { return out_h * out_w; }
};

// cols[patch x positions] for sample n.
void im2col(const Scalar* image, const ConvGeometry& g, Scalar* cols) {
  for (std::size_t c = 0; c < g.in_ch; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const std::size_t row = (c * g.kernel + ky) * g.kernel + kx;
        Scalar* dst = cols + row * g.positions();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                                ix < static_cast<std::ptrdiff_t>(g.width);
            dst[oy * g.out_w + ox] =
                inside ? image[(c * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)]
                       : Scalar{0};
          }
        }
      }
}

void col2im_add(const Scalar* cols, const ConvGeometry& g, Scalar* image) {
  for (std::size_t c = 0; c < g.in_ch; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const std::size_t row = (c * g.kernel + ky) * g.kernel + kx;
        const Scalar* src = cols + row * g.positions();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            image[(c * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)] +=
                src[oy * g.out_w + ox];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  if (weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3)) shape_mismatch("conv2d", x, weight);
  if (bias.numel() != weight.dim(0)) shape_mismatch("conv2d", weight, bias);
  if (stride == 0) throw ContractError("conv2d: stride must be >= 1");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), stride, padding, 0, 0};
  if (g.height + 2 * padding < g.kernel || g.width + 2 * padding < g.kernel) shape_mismatch("conv2d", x, weight);
  g.out_h = (g.height + 2 * padding - g.kernel) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kernel) / stride + 1;

  const auto patch = static_cast<Eigen::Index>(g.patch());
  const auto positions = static_cast<Eigen::Index>(g.positions());
  const auto out_ch = static_cast<Eigen::Index>(g.out_ch);
  const std::size_t in_stride = g.in_ch * g.height * g.width;
  const std::size_t out_stride = g.out_ch * g.positions();

  std::vector<Scalar> out(g.batch * out_stride);
  std::vector<Scalar> cols(g.patch() * g.positions());
  ConstMatrixMap w(weight.data().data(), out_ch, patch);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(x.data().data() + n * in_stride, g, cols.data());
    MatrixMap o(out.data() + n * out_stride, out_ch, positions);
    o.noalias() = w * ConstMatrixMap(cols.data(), patch, positions);
    for (Eigen::Index c = 0; c < out_ch; ++c) o.row(c).array() += bias[static_cast<std::size_t>(c)];
  }

  const bool rec = recording({&x, &weight, &bias});
  Tensor result(Shape{g.batch, g.out_ch, g.out_h, g.out_w}, std::move(out), rec);
  if (rec) {
    record("conv2d", {x.node(), weight.node(), bias.node()}, result,
           [xn = x.node(), wn = weight.node(), bn = bias.node(), on = result.node(), g]() {
             const auto patch = static_cast<Eigen::Index>(g.patch());
             const auto positions = static_cast<Eigen::Index>(g.positions());
             const auto out_ch = static_cast<Eigen::Index>(g.out_ch);
             const std::size_t in_stride = g.in_ch * g.height * g.width;
             const std::size_t out_stride = g.out_ch * g.positions();
             std::vector<Scalar> cols(g.patch() * g.positions());
             std::vector<Scalar> dcols(g.patch() * g.positions());
             ConstMatrixMap w(wn->data.data(), out_ch, patch);
             for (std::size_t n = 0; n < g.batch; ++n) {
               ConstMatrixMap go(on->grad.data() + n * out_stride, out_ch, positions);
               if (bn->requires_grad) {
                 auto& gb = bn->ensure_grad();
                 for (Eigen::Index c = 0; c < out_ch; ++c) gb[static_cast<std::size_t>(c)] += go.row(c).sum();
               }
               if (wn->requires_grad) {
                 im2col(xn->data.data() + n * in_stride, g, cols.data());
                 MatrixMap(wn->ensure_grad().data(), out_ch, patch).noalias() +=
                     go * ConstMatrixMap(cols.data(), patch, positions).transpose();
               }
               if (xn->requires_grad) {
                 MatrixMap(dcols.data(), patch, positions).noalias() = w.transpose() * go;
                 col2im_add(dcols.data(), g, xn->ensure_grad().data() + n * in_stride);
               }
             }
           });
  }
  return result;
}

Tensor maxpool2d(const Tensor& x, std::size_t size, std::size_t stride) {
  require_rank("maxpool2d", x, 4);
  if (size == 0 || stride == 0) throw ContractError("maxpool2d: size and stride must be >= 1");
  const std::size_t n = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < size || w < size) {
    throw DimensionError("maxpool2d: window " + std::to_string(size) + " larger than input " + shape_string(x.shape()));
  }
  const std::size_t oh = (h - size) / stride + 1, ow = (w - size) / stride + 1;
  std::vector<Scalar> out(n * ch * oh * ow);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t plane = 0; plane < n * ch; ++plane) {
    const Scalar* in = x.data().data() + plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * stride) * w + ox * stride;
        for (std::size_t ky = 0; ky < size; ++ky)
          for (std::size_t kx = 0; kx < size; ++kx) {
            const std::size_t idx = (oy * stride + ky) * w + ox * stride + kx;
            if (in[idx] > in[best]) best = idx;
          }
        const std::size_t o = (plane * oh + oy) * ow + ox;
        out[o] = in[best];
        arg[o] = plane * h * w + best;
      }
  }
  const bool rec = recording({&x});
  Tensor result(Shape{n, ch, oh, ow}, std::move(out), rec);
  if (rec) {
    record("maxpool2d", {x.node()}, result, [xn = x.node(), on = result.node(), arg = std::move(arg)]() {
      auto& gx = xn->ensure_grad();
      for (std::size_t o = 0; o < arg.size(); ++o) gx[arg[o]] += on->grad[o];
    });
  }
  return result;
}

}  // namespace falcon::ops
