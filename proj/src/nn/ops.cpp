#include "evaflow/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>

namespace evaflow::nn {

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rank4(const std::vector<int>& shape, const char* op) {
  if (shape.size() != 4) throw shape_error(std::string(op) + ": expected a rank-4 tensor, got " + shape_string(shape));
}

struct ConvGeometry {
  int n, cin, h, w, cout, k, stride, pad, ho, wo;
  int patch() const { return cin * k * k; }
  int out_pixels() const { return ho * wo; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& cg, T* col) {
  const int hw_out = cg.out_pixels();
  for (int c = 0; c < cg.cin; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * cg.h * cg.w;
    for (int ky = 0; ky < cg.k; ++ky) {
      for (int kx = 0; kx < cg.k; ++kx) {
        T* row = col + static_cast<std::size_t>((c * cg.k + ky) * cg.k + kx) * hw_out;
        for (int oy = 0; oy < cg.ho; ++oy) {
          const int iy = oy * cg.stride - cg.pad + ky;
          T* dst = row + oy * cg.wo;
          if (iy < 0 || iy >= cg.h) {
            std::fill(dst, dst + cg.wo, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * cg.w;
          for (int ox = 0; ox < cg.wo; ++ox) {
            const int ix = ox * cg.stride - cg.pad + kx;
            dst[ox] = (ix >= 0 && ix < cg.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& cg, T* dx) {
  const int hw_out = cg.out_pixels();
  for (int c = 0; c < cg.cin; ++c) {
    T* xc = dx + static_cast<std::size_t>(c) * cg.h * cg.w;
    for (int ky = 0; ky < cg.k; ++ky) {
      for (int kx = 0; kx < cg.k; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * cg.k + ky) * cg.k + kx) * hw_out;
        for (int oy = 0; oy < cg.ho; ++oy) {
          const int iy = oy * cg.stride - cg.pad + ky;
          if (iy < 0 || iy >= cg.h) continue;
          T* dst = xc + static_cast<std::size_t>(iy) * cg.w;
          const T* src = row + oy * cg.wo;
          for (int ox = 0; ox < cg.wo; ++ox) {
            const int ix = ox * cg.stride - cg.pad + kx;
            if (ix >= 0 && ix < cg.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T, typename F, typename D>
Var unary(Graph<T>& g, Var a, F&& forward, D&& derivative_from_output) {
  const Tensor<T>& x = g.value(a);
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return g.record(std::move(y), {a}, [a, derivative_from_output](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    const Tensor<T>& x = gr.value(a);
    const Tensor<T>& y = gr.value(self);
    Tensor<T>& dx = gr.grad(a);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * derivative_from_output(x[i], y[i]);
  });
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b))
    throw shape_error(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

// Per-axis interpolation taps for x2 upsampling with half-pixel centers.
struct Taps {
  std::vector<int> i0, i1;
  std::vector<double> w0, w1;
};

Taps upsample_taps(int in) {
  Taps t;
  const int out = 2 * in;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w0.resize(out);
  t.w1.resize(out);
  for (int o = 0; o < out; ++o) {
    const int i = o / 2;
    if (o % 2 == 0) {
      t.i0[o] = std::max(i - 1, 0);
      t.i1[o] = i;
      t.w0[o] = 0.25;
      t.w1[o] = 0.75;
    } else {
      t.i0[o] = i;
      t.i1[o] = std::min(i + 1, in - 1);
      t.w0[o] = 0.75;
      t.w1[o] = 0.25;
    }
  }
  return t;
}

}  // namespace

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var bias, int stride, int pad) {
  const Tensor<T>& xt = g.value(x);
  const Tensor<T>& wt = g.value(w);
  require_rank4(xt.shape(), "conv2d input");
  require_rank4(wt.shape(), "conv2d weight");
  if (wt.dim(1) != xt.dim(1) || wt.dim(2) != wt.dim(3))
    throw shape_error("conv2d: weight " + shape_string(wt.shape()) + " incompatible with input " +
                      shape_string(xt.shape()));
  ConvGeometry cg{xt.dim(0), xt.dim(1), xt.dim(2), xt.dim(3), wt.dim(0), wt.dim(2), stride, pad, 0, 0};
  cg.ho = (cg.h + 2 * pad - cg.k) / stride + 1;
  cg.wo = (cg.w + 2 * pad - cg.k) / stride + 1;
  if (cg.ho < 1 || cg.wo < 1) throw shape_error("conv2d: output would be empty");
  if (bias.defined() && (g.value(bias).rank() != 1 || g.value(bias).dim(0) != cg.cout))
    throw shape_error("conv2d: bias must have " + std::to_string(cg.cout) + " entries");

  Tensor<T> y({cg.n, cg.cout, cg.ho, cg.wo});
  RowMat<T> col(cg.patch(), cg.out_pixels());
  Eigen::Map<const RowMat<T>> wm(wt.data(), cg.cout, cg.patch());
  const std::size_t in_stride = static_cast<std::size_t>(cg.cin) * cg.h * cg.w;
  const std::size_t out_stride = static_cast<std::size_t>(cg.cout) * cg.out_pixels();
  for (int n = 0; n < cg.n; ++n) {
    im2col(xt.data() + n * in_stride, cg, col.data());
    Eigen::Map<RowMat<T>> ym(y.data() + n * out_stride, cg.cout, cg.out_pixels());
    ym.noalias() = wm * col;
    if (bias.defined()) {
      const Tensor<T>& bt = g.value(bias);
      for (int c = 0; c < cg.cout; ++c) ym.row(c).array() += bt[c];
    }
  }

  return g.record(std::move(y), {x, w, bias.defined() ? bias : x}, [x, w, bias, cg](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    const Tensor<T>& xt = gr.value(x);
    const Tensor<T>& wt = gr.value(w);
    const std::size_t in_stride = static_cast<std::size_t>(cg.cin) * cg.h * cg.w;
    const std::size_t out_stride = static_cast<std::size_t>(cg.cout) * cg.out_pixels();
    Eigen::Map<const RowMat<T>> wm(wt.data(), cg.cout, cg.patch());
    RowMat<T> col(cg.patch(), cg.out_pixels());
    RowMat<T> dcol(cg.patch(), cg.out_pixels());
    const bool need_x = gr.requires_grad(x);
    const bool need_w = gr.requires_grad(w);
    const bool need_b = bias.defined() && gr.requires_grad(bias);
    for (int n = 0; n < cg.n; ++n) {
      Eigen::Map<const RowMat<T>> dym(dy.data() + n * out_stride, cg.cout, cg.out_pixels());
      if (need_w) {
        im2col(xt.data() + n * in_stride, cg, col.data());
        Eigen::Map<RowMat<T>> dwm(gr.grad(w).data(), cg.cout, cg.patch());
        dwm.noalias() += dym * col.transpose();
      }
      if (need_b) {
        Tensor<T>& db = gr.grad(bias);
        for (int c = 0; c < cg.cout; ++c) db[c] += dym.row(c).sum();
      }
      if (need_x) {
        dcol.noalias() = wm.transpose() * dym;
        col2im_add(dcol.data(), cg, gr.grad(x).data() + n * in_stride);
      }
    }
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require_same(x, y, "add");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    for (Var p : {a, b}) {
      if (!gr.requires_grad(p)) continue;
      Tensor<T>& dp = gr.grad(p);
      for (std::size_t i = 0; i < dy.size(); ++i) dp[i] += dy[i];
    }
  });
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require_same(x, y, "sub");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    if (gr.requires_grad(a)) {
      Tensor<T>& da = gr.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
    }
    if (gr.requires_grad(b)) {
      Tensor<T>& db = gr.grad(b);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
    }
  });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require_same(x, y, "mul");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    const Tensor<T>& x = gr.value(a);
    const Tensor<T>& y = gr.value(b);
    if (gr.requires_grad(a)) {
      Tensor<T>& da = gr.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * y[i];
    }
    if (gr.requires_grad(b)) {
      Tensor<T>& db = gr.grad(b);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * x[i];
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, T factor) {
  return unary(g, a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var one_minus(Graph<T>& g, Var a) {
  return unary(g, a, [](T x) { return T(1) - x; }, [](T, T) { return T(-1); });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var a) {
  return unary(g, a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var tanh(Graph<T>& g, Var a) {
  return unary(g, a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var relu(Graph<T>& g, Var a) {
  return unary(g, a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var leaky_relu(Graph<T>& g, Var a, T slope) {
  return unary(g, a, [slope](T x) { return x > T(0) ? x : slope * x; },
               [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var concat_channels(Graph<T>& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw shape_error("concat_channels: nothing to concatenate");
  const Tensor<T>& first = g.value(parts[0]);
  require_rank4(first.shape(), "concat_channels");
  const int n = first.dim(0), h = first.dim(2), w = first.dim(3);
  int channels = 0;
  for (Var p : parts) {
    const Tensor<T>& t = g.value(p);
    require_rank4(t.shape(), "concat_channels");
    if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w)
      throw shape_error("concat_channels: " + shape_string(t.shape()) + " vs " + shape_string(first.shape()));
    channels += t.dim(1);
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> out({n, channels, h, w});
  for (int b = 0; b < n; ++b) {
    T* dst = out.data() + static_cast<std::size_t>(b) * channels * plane;
    for (Var p : parts) {
      const Tensor<T>& t = g.value(p);
      const std::size_t len = static_cast<std::size_t>(t.dim(1)) * plane;
      std::copy_n(t.data() + b * len, len, dst);
      dst += len;
    }
  }
  return g.record_range(std::move(out), parts, [parts, n, channels, plane](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    for (int b = 0; b < n; ++b) {
      const T* src = dy.data() + static_cast<std::size_t>(b) * channels * plane;
      for (Var p : parts) {
        const std::size_t len = static_cast<std::size_t>(gr.value(p).dim(1)) * plane;
        if (gr.requires_grad(p)) {
          T* dst = gr.grad(p).data() + b * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
        src += len;
      }
    }
  });
}

template <typename T>
Var slice_batch(Graph<T>& g, Var x, int n) {
  const Tensor<T>& t = g.value(x);
  require_rank4(t.shape(), "slice_batch");
  if (n < 0 || n >= t.dim(0)) throw shape_error("slice_batch: index out of range");
  const std::size_t len = static_cast<std::size_t>(t.dim(1)) * t.dim(2) * t.dim(3);
  Tensor<T> out({1, t.dim(1), t.dim(2), t.dim(3)});
  std::copy_n(t.data() + n * len, len, out.data());
  return g.record(std::move(out), {x}, [x, n, len](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    T* dst = gr.grad(x).data() + n * len;
    for (std::size_t i = 0; i < len; ++i) dst[i] += dy[i];
  });
}

template <typename T>
Var warp(Graph<T>& g, Var features, Var flow) {
  const Tensor<T>& f = g.value(features);
  const Tensor<T>& fl = g.value(flow);
  require_rank4(f.shape(), "warp features");
  require_rank4(fl.shape(), "warp flow");
  if (fl.dim(0) != f.dim(0) || fl.dim(1) != 2 || fl.dim(2) != f.dim(2) || fl.dim(3) != f.dim(3))
    throw shape_error("warp: flow " + shape_string(fl.shape()) + " does not match features " +
                      shape_string(f.shape()));
  const int N = f.dim(0), C = f.dim(1), H = f.dim(2), W = f.dim(3);
  Tensor<T> out(f.shape());
  for (int n = 0; n < N; ++n) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double sx = x + static_cast<double>(fl.at(n, 0, y, x));
        const double sy = y + static_cast<double>(fl.at(n, 1, y, x));
        if (!(sx >= 0.0 && sy >= 0.0 && sx <= W - 1 && sy <= H - 1)) continue;
        const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        const T ax = static_cast<T>(sx - x0), ay = static_cast<T>(sy - y0);
        for (int c = 0; c < C; ++c) {
          T acc = (T(1) - ay) * (T(1) - ax) * f.at(n, c, y0, x0);
          if (ax > T(0)) acc += (T(1) - ay) * ax * f.at(n, c, y0, x0 + 1);
          if (ay > T(0)) {
            acc += ay * (T(1) - ax) * f.at(n, c, y0 + 1, x0);
            if (ax > T(0)) acc += ay * ax * f.at(n, c, y0 + 1, x0 + 1);
          }
          out.at(n, c, y, x) = acc;
        }
      }
    }
  }
  return g.record(std::move(out), {features, flow}, [features, flow, N, C, H, W](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    const Tensor<T>& f = gr.value(features);
    const Tensor<T>& fl = gr.value(flow);
    const bool need_f = gr.requires_grad(features);
    const bool need_flow = gr.requires_grad(flow);
    Tensor<T>* df = need_f ? &gr.grad(features) : nullptr;
    Tensor<T>* dflow = need_flow ? &gr.grad(flow) : nullptr;
    auto value_at = [&](int n, int c, int yy, int xx) -> T {
      return (yy < H && xx < W) ? f.at(n, c, yy, xx) : T(0);
    };
    for (int n = 0; n < N; ++n) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const double sx = x + static_cast<double>(fl.at(n, 0, y, x));
          const double sy = y + static_cast<double>(fl.at(n, 1, y, x));
          if (!(sx >= 0.0 && sy >= 0.0 && sx <= W - 1 && sy <= H - 1)) continue;
          const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
          const T ax = static_cast<T>(sx - x0), ay = static_cast<T>(sy - y0);
          T gx = 0, gy = 0;
          for (int c = 0; c < C; ++c) {
            const T d = dy.at(n, c, y, x);
            if (d == T(0)) continue;
            const T v00 = f.at(n, c, y0, x0), v01 = value_at(n, c, y0, x0 + 1);
            const T v10 = value_at(n, c, y0 + 1, x0), v11 = value_at(n, c, y0 + 1, x0 + 1);
            if (df) {
              df->at(n, c, y0, x0) += d * (T(1) - ay) * (T(1) - ax);
              if (ax > T(0)) df->at(n, c, y0, x0 + 1) += d * (T(1) - ay) * ax;
              if (ay > T(0)) {
                df->at(n, c, y0 + 1, x0) += d * ay * (T(1) - ax);
                if (ax > T(0)) df->at(n, c, y0 + 1, x0 + 1) += d * ay * ax;
              }
            }
            gx += d * ((T(1) - ay) * (v01 - v00) + ay * (v11 - v10));
            gy += d * ((T(1) - ax) * (v10 - v00) + ax * (v11 - v01));
          }
          if (dflow) {
            dflow->at(n, 0, y, x) += gx;
            dflow->at(n, 1, y, x) += gy;
          }
        }
      }
    }
  });
}

template <typename T>
Var upsample2x(Graph<T>& g, Var x) {
  const Tensor<T>& t = g.value(x);
  require_rank4(t.shape(), "upsample2x");
  const int N = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  const Taps ty = upsample_taps(H), tx = upsample_taps(W);
  Tensor<T> out({N, C, 2 * H, 2 * W});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < 2 * H; ++oy) {
        const T wy0 = static_cast<T>(ty.w0[oy]), wy1 = static_cast<T>(ty.w1[oy]);
        for (int ox = 0; ox < 2 * W; ++ox) {
          const T wx0 = static_cast<T>(tx.w0[ox]), wx1 = static_cast<T>(tx.w1[ox]);
          out.at(n, c, oy, ox) = wy0 * (wx0 * t.at(n, c, ty.i0[oy], tx.i0[ox]) + wx1 * t.at(n, c, ty.i0[oy], tx.i1[ox])) +
                                 wy1 * (wx0 * t.at(n, c, ty.i1[oy], tx.i0[ox]) + wx1 * t.at(n, c, ty.i1[oy], tx.i1[ox]));
        }
      }
  return g.record(std::move(out), {x}, [x, N, C, H, W, ty, tx](Graph<T>& gr, int self) {
    const Tensor<T>& dy = gr.grad(self);
    Tensor<T>& dx = gr.grad(x);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < 2 * H; ++oy) {
          const T wy0 = static_cast<T>(ty.w0[oy]), wy1 = static_cast<T>(ty.w1[oy]);
          for (int ox = 0; ox < 2 * W; ++ox) {
            const T wx0 = static_cast<T>(tx.w0[ox]), wx1 = static_cast<T>(tx.w1[ox]);
            const T d = dy.at(n, c, oy, ox);
            dx.at(n, c, ty.i0[oy], tx.i0[ox]) += d * wy0 * wx0;
            dx.at(n, c, ty.i0[oy], tx.i1[ox]) += d * wy0 * wx1;
            dx.at(n, c, ty.i1[oy], tx.i0[ox]) += d * wy1 * wx0;
            dx.at(n, c, ty.i1[oy], tx.i1[ox]) += d * wy1 * wx1;
          }
        }
  });
}

template <typename T>
Var l1_mean(Graph<T>& g, Var pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask) {
  const Tensor<T>& p = g.value(pred);
  require_rank4(p.shape(), "l1_mean");
  if (p.dim(0) != 1 || p.dim(1) != 2 || !p.same_shape(target))
    throw shape_error("l1_mean: prediction " + shape_string(p.shape()) + " vs target " + shape_string(target.shape()));
  const std::size_t plane = static_cast<std::size_t>(p.dim(2)) * p.dim(3);
  if (mask.size() != plane) throw shape_error("l1_mean: mask size mismatch");
  std::size_t n_valid = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    if (!mask[i]) continue;
    ++n_valid;
    acc += std::abs(static_cast<double>(p[i]) - target[i]) + std::abs(static_cast<double>(p[plane + i]) - target[plane + i]);
  }
  if (n_valid == 0) throw data_error("l1_mean: no valid pixels");
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<double>(n_valid)));
  return g.record(std::move(out), {pred}, [pred, target, mask, plane, n_valid](Graph<T>& gr, int self) {
    const T d = gr.grad(self)[0] / static_cast<T>(n_valid);
    const Tensor<T>& p = gr.value(pred);
    Tensor<T>& dp = gr.grad(pred);
    for (std::size_t i = 0; i < plane; ++i) {
      if (!mask[i]) continue;
      for (std::size_t k : {i, plane + i}) {
        const T diff = p[k] - target[k];
        dp[k] += diff > T(0) ? d : (diff < T(0) ? -d : T(0));
      }
    }
  });
}

template <typename T>
Var weighted_sum(Graph<T>& g, Var x, const Tensor<T>& weights) {
  const Tensor<T>& t = g.value(x);
  require_same(t, weights, "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) acc += static_cast<double>(t[i]) * weights[i];
  return g.record(Tensor<T>({1}, static_cast<T>(acc)), {x}, [x, weights](Graph<T>& gr, int self) {
    const T d = gr.grad(self)[0];
    Tensor<T>& dx = gr.grad(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d * weights[i];
  });
}

#define EVAFLOW_INSTANTIATE_OPS(T)                                                              \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var, int, int);                                  \
  template Var add<T>(Graph<T>&, Var, Var);                                                    \
  template Var sub<T>(Graph<T>&, Var, Var);                                                    \
  template Var mul<T>(Graph<T>&, Var, Var);                                                    \
  template Var scale<T>(Graph<T>&, Var, T);                                                    \
  template Var one_minus<T>(Graph<T>&, Var);                                                   \
  template Var sigmoid<T>(Graph<T>&, Var);                                                     \
  template Var tanh<T>(Graph<T>&, Var);                                                        \
  template Var relu<T>(Graph<T>&, Var);                                                        \
  template Var leaky_relu<T>(Graph<T>&, Var, T);                                               \
  template Var concat_channels<T>(Graph<T>&, const std::vector<Var>&);                         \
  template Var slice_batch<T>(Graph<T>&, Var, int);                                            \
  template Var warp<T>(Graph<T>&, Var, Var);                                                   \
  template Var upsample2x<T>(Graph<T>&, Var);                                                  \
  template Var l1_mean<T>(Graph<T>&, Var, const Tensor<T>&, const std::vector<std::uint8_t>&); \
  template Var weighted_sum<T>(Graph<T>&, Var, const Tensor<T>&);

EVAFLOW_INSTANTIATE_OPS(float)
EVAFLOW_INSTANTIATE_OPS(double)

}  // namespace evaflow::nn
