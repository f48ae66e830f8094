#ifndef SA_OPS_HPP
#define SA_OPS_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sa/autodiff.hpp"

namespace sa {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

enum class PoolMode { kMax, kAvg };

// Per-channel running statistics owned by the model, updated in training mode.
template <typename S>
struct RunningStats {
  Tensor<S> mean;
  Tensor<S> var;

  static RunningStats make(int channels) {
    RunningStats st;
    st.mean = Tensor<S>({1, channels, 1, 1}, S(0));
    st.var = Tensor<S>({1, channels, 1, 1}, S(1));
    return st;
  }
};

namespace detail {

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename S>
S stable_sigmoid(S x) {
  if (x >= S(0)) {
    return S(1) / (S(1) + std::exp(-x));
  }
  const S e = std::exp(x);
  return e / (S(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& kernel, const Var<S>& bias,
              int stride, int padding) {
  const Shape4 xs = x.shape();
  const Shape4 ks = kernel.shape();
  if (stride < 1) throw DimensionError(strcat("conv2d: stride must be >= 1, got ", stride));
  if (padding < 0) throw DimensionError(strcat("conv2d: padding must be >= 0, got ", padding));
  if (xs.c != ks.c) {
    throw DimensionError(strcat("conv2d: channel axis mismatch, input has ", xs.c,
                                " channels but kernel expects ", ks.c));
  }
  if (bias.defined() && bias.numel() != ks.n) {
    throw DimensionError(strcat("conv2d: bias axis mismatch, kernel has ", ks.n,
                                " output channels but bias has ", bias.numel()));
  }
  const int ho = detail::conv_out_dim(xs.h, ks.h, stride, padding);
  const int wo = detail::conv_out_dim(xs.w, ks.w, stride, padding);
  if (ho < 1 || wo < 1) {
    throw DimensionError(strcat("conv2d: kernel ", ks.h, "x", ks.w,
                                " does not fit padded input ", to_string(xs)));
  }

  Tensor<S> out({xs.n, ks.n, ho, wo}, S(0));
  const Tensor<S>& xv = x.value();
  const Tensor<S>& kv = kernel.value();

  for (int n = 0; n < xs.n; ++n) {
    for (int co = 0; co < ks.n; ++co) {
      S* oplane = &out.at(n, co, 0, 0);
      if (bias.defined()) {
        const S b = bias.value()[co];
        for (std::int64_t i = 0; i < std::int64_t(ho) * wo; ++i) oplane[i] = b;
      }
      for (int ci = 0; ci < ks.c; ++ci) {
        for (int ky = 0; ky < ks.h; ++ky) {
          for (int kx = 0; kx < ks.w; ++kx) {
            const S kval = kv.at(co, ci, ky, kx);
            if (kval == S(0)) continue;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= xs.h) continue;
              const S* xrow = &xv.at(n, ci, iy, 0);
              S* orow = oplane + std::int64_t(oy) * wo;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride - padding + kx;
                if (ix < 0 || ix >= xs.w) continue;
                orow[ox] += kval * xrow[ix];
              }
            }
          }
        }
      }
    }
  }

  std::vector<std::shared_ptr<Node<S>>> parents{x.ptr(), kernel.ptr()};
  if (bias.defined()) parents.push_back(bias.ptr());
  auto backward = [stride, padding, xs, ks, ho, wo](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    Node<S>& kn = *self.parents[1];
    Node<S>* bn = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    const Tensor<S>& g = self.grad;
    const bool need_dx = xn.needs_grad;
    const bool need_dk = kn.needs_grad;
    Tensor<S>* dx = need_dx ? &xn.ensure_grad() : nullptr;
    Tensor<S>* dk = need_dk ? &kn.ensure_grad() : nullptr;
    if (bn && bn->needs_grad) {
      Tensor<S>& db = bn->ensure_grad();
      for (int n = 0; n < xs.n; ++n)
        for (int co = 0; co < ks.n; ++co) {
          const S* grow = &g.at(n, co, 0, 0);
          S acc = S(0);
          for (std::int64_t i = 0; i < std::int64_t(ho) * wo; ++i) acc += grow[i];
          db[co] += acc;
        }
    }
    if (!need_dx && !need_dk) return;
    const Tensor<S>& xv = xn.value;
    const Tensor<S>& kv = kn.value;
    for (int n = 0; n < xs.n; ++n) {
      for (int co = 0; co < ks.n; ++co) {
        const S* gplane = &g.at(n, co, 0, 0);
        for (int ci = 0; ci < ks.c; ++ci) {
          for (int ky = 0; ky < ks.h; ++ky) {
            for (int kx = 0; kx < ks.w; ++kx) {
              const S kval = kv.at(co, ci, ky, kx);
              S kacc = S(0);
              for (int oy = 0; oy < ho; ++oy) {
                const int iy = oy * stride - padding + ky;
                if (iy < 0 || iy >= xs.h) continue;
                const S* grow = gplane + std::int64_t(oy) * wo;
                const S* xrow = &xv.at(n, ci, iy, 0);
                S* dxrow = need_dx ? &dx->at(n, ci, iy, 0) : nullptr;
                for (int ox = 0; ox < wo; ++ox) {
                  const int ix = ox * stride - padding + kx;
                  if (ix < 0 || ix >= xs.w) continue;
                  const S gv = grow[ox];
                  if (need_dk) kacc += gv * xrow[ix];
                  if (need_dx) dxrow[ix] += gv * kval;
                }
              }
              if (need_dk) dk->at(co, ci, ky, kx) += kacc;
            }
          }
        }
      }
    }
  };
  return detail::make_op_node<S>(std::move(out), std::move(parents), std::move(backward));
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& kernel, int stride, int padding) {
  return conv2d(x, kernel, Var<S>(), stride, padding);
}

// ---------------------------------------------------------------------------
// pool2d

template <typename S>
Var<S> pool2d(const Var<S>& x, PoolMode mode, int window, int stride) {
  const Shape4 xs = x.shape();
  if (window < 1 || stride < 1) {
    throw DimensionError(strcat("pool2d: window and stride must be >= 1, got window=",
                                window, " stride=", stride));
  }
  if (window > xs.h || window > xs.w) {
    throw DimensionError(strcat("pool2d: window ", window, " larger than input ",
                                to_string(xs)));
  }
  const int ho = (xs.h - window) / stride + 1;
  const int wo = (xs.w - window) / stride + 1;
  Tensor<S> out({xs.n, xs.c, ho, wo}, S(0));
  const Tensor<S>& xv = x.value();

  // Max mode routes the gradient to the first maximal element in row-major
  // order; argmax flat offsets are kept for the backward pass.
  std::vector<std::int64_t> argmax;
  if (mode == PoolMode::kMax) argmax.resize(static_cast<std::size_t>(out.numel()));

  std::int64_t oi = 0;
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++oi) {
          const int iy0 = oy * stride;
          const int ix0 = ox * stride;
          if (mode == PoolMode::kMax) {
            S best = xv.at(n, c, iy0, ix0);
            std::int64_t best_at = static_cast<std::int64_t>(xv.flat(n, c, iy0, ix0));
            for (int ky = 0; ky < window; ++ky)
              for (int kx = 0; kx < window; ++kx) {
                const S v = xv.at(n, c, iy0 + ky, ix0 + kx);
                if (v > best) {
                  best = v;
                  best_at = static_cast<std::int64_t>(xv.flat(n, c, iy0 + ky, ix0 + kx));
                }
              }
            out[oi] = best;
            argmax[static_cast<std::size_t>(oi)] = best_at;
          } else {
            S acc = S(0);
            for (int ky = 0; ky < window; ++ky)
              for (int kx = 0; kx < window; ++kx) acc += xv.at(n, c, iy0 + ky, ix0 + kx);
            out[oi] = acc / S(window * window);
          }
        }
      }
    }
  }

  auto backward = [mode, window, stride, xs, ho, wo, argmax = std::move(argmax)](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    if (!xn.needs_grad) return;
    Tensor<S>& dx = xn.ensure_grad();
    const Tensor<S>& g = self.grad;
    if (mode == PoolMode::kMax) {
      const std::int64_t m = g.numel();
      for (std::int64_t i = 0; i < m; ++i) dx[argmax[static_cast<std::size_t>(i)]] += g[i];
    } else {
      const S inv = S(1) / S(window * window);
      std::int64_t oi = 0;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c)
          for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox, ++oi) {
              const S gv = g[oi] * inv;
              for (int ky = 0; ky < window; ++ky)
                for (int kx = 0; kx < window; ++kx)
                  dx.at(n, c, oy * stride + ky, ox * stride + kx) += gv;
            }
    }
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr()}, std::move(backward));
}

// ---------------------------------------------------------------------------
// bilinear_resize

namespace detail {

struct LerpAxis {
  std::vector<int> lo, hi;
  std::vector<double> t;  // weight of hi sample
};

// Half-pixel source mapping with edge clamping.
inline LerpAxis lerp_axis(int in, int out) {
  LerpAxis a;
  a.lo.resize(out);
  a.hi.resize(out);
  a.t.resize(out);
  const double scale = double(in) / double(out);
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    const double limit = double(in - 1);
    if (src > limit) src = limit;
    const int lo = static_cast<int>(src);
    a.lo[d] = lo;
    a.hi[d] = lo + 1 < in ? lo + 1 : lo;
    a.t[d] = src - lo;
  }
  return a;
}

}  // namespace detail

template <typename S>
Var<S> bilinear_resize(const Var<S>& x, int out_h, int out_w) {
  const Shape4 xs = x.shape();
  if (out_h < 1 || out_w < 1) {
    throw DimensionError(strcat("bilinear_resize: target dims must be >= 1, got ",
                                out_h, "x", out_w));
  }

  // Same-dims resize is an exact identity, bit for bit.
  if (out_h == xs.h && out_w == xs.w) {
    Tensor<S> out = x.value();
    auto backward = [](Node<S>& self) {
      Node<S>& xn = *self.parents[0];
      if (xn.needs_grad) xn.accumulate_grad(self.grad);
    };
    return detail::make_op_node<S>(std::move(out), {x.ptr()}, std::move(backward));
  }

  const auto ay = detail::lerp_axis(xs.h, out_h);
  const auto ax = detail::lerp_axis(xs.w, out_w);
  Tensor<S> out({xs.n, xs.c, out_h, out_w}, S(0));
  const Tensor<S>& xv = x.value();

  std::int64_t oi = 0;
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = ay.lo[oy], y1 = ay.hi[oy];
        const S ty = static_cast<S>(ay.t[oy]);
        const S* row0 = &xv.at(n, c, y0, 0);
        const S* row1 = &xv.at(n, c, y1, 0);
        for (int ox = 0; ox < out_w; ++ox, ++oi) {
          const int x0 = ax.lo[ox], x1 = ax.hi[ox];
          const S tx = static_cast<S>(ax.t[ox]);
          const S top = row0[x0] + tx * (row0[x1] - row0[x0]);
          const S bot = row1[x0] + tx * (row1[x1] - row1[x0]);
          out[oi] = top + ty * (bot - top);
        }
      }
    }
  }

  auto backward = [xs, out_h, out_w, ay, ax](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    if (!xn.needs_grad) return;
    Tensor<S>& dx = xn.ensure_grad();
    const Tensor<S>& g = self.grad;
    std::int64_t oi = 0;
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c)
        for (int oy = 0; oy < out_h; ++oy) {
          const int y0 = ay.lo[oy], y1 = ay.hi[oy];
          const S ty = static_cast<S>(ay.t[oy]);
          for (int ox = 0; ox < out_w; ++ox, ++oi) {
            const int x0 = ax.lo[ox], x1 = ax.hi[ox];
            const S tx = static_cast<S>(ax.t[ox]);
            const S gv = g[oi];
            dx.at(n, c, y0, x0) += gv * (S(1) - ty) * (S(1) - tx);
            dx.at(n, c, y0, x1) += gv * (S(1) - ty) * tx;
            dx.at(n, c, y1, x0) += gv * ty * (S(1) - tx);
            dx.at(n, c, y1, x1) += gv * ty * tx;
          }
        }
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr()}, std::move(backward));
}

// ---------------------------------------------------------------------------
// relu

template <typename S>
Var<S> relu(const Var<S>& x) {
  const Tensor<S>& xv = x.value();
  Tensor<S> out(xv.shape(), S(0));
  const std::int64_t m = xv.numel();
  for (std::int64_t i = 0; i < m; ++i) out[i] = xv[i] > S(0) ? xv[i] : S(0);
  auto backward = [](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    if (!xn.needs_grad) return;
    Tensor<S>& dx = xn.ensure_grad();
    const Tensor<S>& xv = xn.value;
    const Tensor<S>& g = self.grad;
    const std::int64_t m = g.numel();
    for (std::int64_t i = 0; i < m; ++i)
      if (xv[i] > S(0)) dx[i] += g[i];  // subgradient 0 at 0
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr()}, std::move(backward));
}

// ---------------------------------------------------------------------------
// batchnorm2d

// Training mode normalizes with batch statistics over (n,h,w) per channel and,
// when `stats` is given, folds them into the running estimates. Eval mode
// requires `stats`. Pass stats=nullptr in training mode for a side-effect-free
// forward (used by the gradient checks).
template <typename S>
Var<S> batchnorm2d(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                   RunningStats<S>* stats, bool training) {
  const Shape4 xs = x.shape();
  if (gamma.numel() != xs.c || beta.numel() != xs.c) {
    throw DimensionError(strcat("batchnorm2d: channel axis mismatch, input has ", xs.c,
                                " channels, gamma/beta have ", gamma.numel(), "/",
                                beta.numel()));
  }
  if (!training && stats == nullptr) {
    throw Error("batchnorm2d: eval mode requires running statistics");
  }
  const std::int64_t plane = std::int64_t(xs.h) * xs.w;
  const std::int64_t m = std::int64_t(xs.n) * plane;  // elements per channel

  Tensor<S> mean({1, xs.c, 1, 1}, S(0));
  Tensor<S> inv_std({1, xs.c, 1, 1}, S(0));
  const Tensor<S>& xv = x.value();

  if (training) {
    for (int c = 0; c < xs.c; ++c) {
      S acc = S(0);
      for (int n = 0; n < xs.n; ++n) {
        const S* p = &xv.at(n, c, 0, 0);
        for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
      }
      const S mu = acc / S(m);
      S var_acc = S(0);
      for (int n = 0; n < xs.n; ++n) {
        const S* p = &xv.at(n, c, 0, 0);
        for (std::int64_t i = 0; i < plane; ++i) {
          const S d = p[i] - mu;
          var_acc += d * d;
        }
      }
      const S var = var_acc / S(m);
      mean[c] = mu;
      inv_std[c] = S(1) / std::sqrt(var + S(kBatchNormEps));
      if (stats != nullptr) {
        const S mom = S(kBatchNormMomentum);
        const S unbiased = m > 1 ? var * S(m) / S(m - 1) : var;
        stats->mean[c] = (S(1) - mom) * stats->mean[c] + mom * mu;
        stats->var[c] = (S(1) - mom) * stats->var[c] + mom * unbiased;
      }
    }
  } else {
    for (int c = 0; c < xs.c; ++c) {
      mean[c] = stats->mean[c];
      inv_std[c] = S(1) / std::sqrt(stats->var[c] + S(kBatchNormEps));
    }
  }

  Tensor<S> xhat(xs, S(0));
  Tensor<S> out(xs, S(0));
  const Tensor<S>& gv = gamma.value();
  const Tensor<S>& bv = beta.value();
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const S mu = mean[c], is = inv_std[c], ga = gv[c], be = bv[c];
      const S* p = &xv.at(n, c, 0, 0);
      S* ph = &xhat.at(n, c, 0, 0);
      S* po = &out.at(n, c, 0, 0);
      for (std::int64_t i = 0; i < plane; ++i) {
        ph[i] = (p[i] - mu) * is;
        po[i] = ga * ph[i] + be;
      }
    }

  auto backward = [xs, plane, m, training, inv_std = std::move(inv_std),
                   xhat = std::move(xhat)](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    Node<S>& gn = *self.parents[1];
    Node<S>& bn = *self.parents[2];
    const Tensor<S>& g = self.grad;
    Tensor<S>* dg = gn.needs_grad ? &gn.ensure_grad() : nullptr;
    Tensor<S>* db = bn.needs_grad ? &bn.ensure_grad() : nullptr;
    Tensor<S>* dx = xn.needs_grad ? &xn.ensure_grad() : nullptr;
    const Tensor<S>& ga = gn.value;
    for (int c = 0; c < xs.c; ++c) {
      S sum_g = S(0), sum_gx = S(0);
      for (int n = 0; n < xs.n; ++n) {
        const S* pg = &g.at(n, c, 0, 0);
        const S* ph = &xhat.at(n, c, 0, 0);
        for (std::int64_t i = 0; i < plane; ++i) {
          sum_g += pg[i];
          sum_gx += pg[i] * ph[i];
        }
      }
      if (dg) (*dg)[c] += sum_gx;
      if (db) (*db)[c] += sum_g;
      if (dx) {
        const S is = inv_std[c];
        const S scale = ga[c] * is;
        if (training) {
          const S mg = sum_g / S(m);
          const S mgx = sum_gx / S(m);
          for (int n = 0; n < xs.n; ++n) {
            const S* pg = &g.at(n, c, 0, 0);
            const S* ph = &xhat.at(n, c, 0, 0);
            S* pd = &dx->at(n, c, 0, 0);
            for (std::int64_t i = 0; i < plane; ++i)
              pd[i] += scale * (pg[i] - mg - ph[i] * mgx);
          }
        } else {
          for (int n = 0; n < xs.n; ++n) {
            const S* pg = &g.at(n, c, 0, 0);
            S* pd = &dx->at(n, c, 0, 0);
            for (std::int64_t i = 0; i < plane; ++i) pd[i] += scale * pg[i];
          }
        }
      }
    }
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr(), gamma.ptr(), beta.ptr()},
                                 std::move(backward));
}

// ---------------------------------------------------------------------------
// affine (fully connected; trailing axes of x are flattened into features)

template <typename S>
Var<S> affine(const Var<S>& x, const Var<S>& weight, const Var<S>& bias) {
  const Shape4 xs = x.shape();
  const Shape4 ws = weight.shape();
  const std::int64_t features = std::int64_t(xs.c) * xs.h * xs.w;
  const std::int64_t wf = std::int64_t(ws.c) * ws.h * ws.w;
  if (features != wf) {
    throw DimensionError(strcat("affine: feature axis mismatch, input has ", features,
                                " features but weight expects ", wf));
  }
  const int out_f = ws.n;
  if (bias.defined() && bias.numel() != out_f) {
    throw DimensionError(strcat("affine: bias axis mismatch, weight has ", out_f,
                                " rows but bias has ", bias.numel()));
  }
  Tensor<S> out({xs.n, out_f, 1, 1}, S(0));
  const Tensor<S>& xv = x.value();
  const Tensor<S>& wv = weight.value();
  for (int n = 0; n < xs.n; ++n) {
    const S* xrow = xv.data() + n * features;
    for (int o = 0; o < out_f; ++o) {
      const S* wrow = wv.data() + o * features;
      S acc = bias.defined() ? bias.value()[o] : S(0);
      for (std::int64_t f = 0; f < features; ++f) acc += xrow[f] * wrow[f];
      out.at(n, o, 0, 0) = acc;
    }
  }
  std::vector<std::shared_ptr<Node<S>>> parents{x.ptr(), weight.ptr()};
  if (bias.defined()) parents.push_back(bias.ptr());
  auto backward = [features, out_f, batch = xs.n](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    Node<S>& wn = *self.parents[1];
    Node<S>* bn = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    const Tensor<S>& g = self.grad;
    const Tensor<S>& xv = xn.value;
    const Tensor<S>& wv = wn.value;
    Tensor<S>* dx = xn.needs_grad ? &xn.ensure_grad() : nullptr;
    Tensor<S>* dw = wn.needs_grad ? &wn.ensure_grad() : nullptr;
    Tensor<S>* db = (bn && bn->needs_grad) ? &bn->ensure_grad() : nullptr;
    for (int n = 0; n < batch; ++n) {
      const S* xrow = xv.data() + n * features;
      S* dxrow = dx ? dx->data() + n * features : nullptr;
      for (int o = 0; o < out_f; ++o) {
        const S gv = g[std::int64_t(n) * out_f + o];
        if (gv == S(0)) continue;
        const S* wrow = wv.data() + o * features;
        if (db) (*db)[o] += gv;
        if (dw) {
          S* dwrow = dw->data() + o * features;
          for (std::int64_t f = 0; f < features; ++f) dwrow[f] += gv * xrow[f];
        }
        if (dx) {
          for (std::int64_t f = 0; f < features; ++f) dxrow[f] += gv * wrow[f];
        }
      }
    }
  };
  return detail::make_op_node<S>(std::move(out), std::move(parents), std::move(backward));
}

// ---------------------------------------------------------------------------
// global_avg_pool

template <typename S>
Var<S> global_avg_pool(const Var<S>& x) {
  const Shape4 xs = x.shape();
  const std::int64_t plane = std::int64_t(xs.h) * xs.w;
  Tensor<S> out({xs.n, xs.c, 1, 1}, S(0));
  const Tensor<S>& xv = x.value();
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const S* p = &xv.at(n, c, 0, 0);
      S acc = S(0);
      for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
      out.at(n, c, 0, 0) = acc / S(plane);
    }
  auto backward = [xs, plane](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    if (!xn.needs_grad) return;
    Tensor<S>& dx = xn.ensure_grad();
    const Tensor<S>& g = self.grad;
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const S gv = g.at(n, c, 0, 0) / S(plane);
        S* pd = &dx.at(n, c, 0, 0);
        for (std::int64_t i = 0; i < plane; ++i) pd[i] += gv;
      }
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr()}, std::move(backward));
}

// ---------------------------------------------------------------------------
// softmax_cross_entropy

template <typename S>
Var<S> softmax_cross_entropy(const Var<S>& logits, const std::vector<int>& labels) {
  const Shape4 ls = logits.shape();
  if (ls.h != 1 || ls.w != 1) {
    throw DimensionError(strcat("softmax_cross_entropy: logits must be (n,classes,1,1), got ",
                                to_string(ls)));
  }
  if (static_cast<int>(labels.size()) != ls.n) {
    throw DimensionError(strcat("softmax_cross_entropy: batch axis mismatch, ", ls.n,
                                " logit rows vs ", labels.size(), " labels"));
  }
  const int classes = ls.c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw Error(strcat("softmax_cross_entropy: label ", labels[i], " at index ", i,
                         " outside [0,", classes, ")"));
    }
  }
  const Tensor<S>& lv = logits.value();
  Tensor<S> probs(ls, S(0));
  S loss = S(0);
  for (int n = 0; n < ls.n; ++n) {
    const S* row = lv.data() + std::int64_t(n) * classes;
    S* prow = probs.data() + std::int64_t(n) * classes;
    S mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    S denom = S(0);
    for (int c = 0; c < classes; ++c) {
      prow[c] = std::exp(row[c] - mx);
      denom += prow[c];
    }
    for (int c = 0; c < classes; ++c) prow[c] /= denom;
    loss -= std::log(prow[labels[static_cast<std::size_t>(n)]]);
  }
  loss /= S(ls.n);

  auto backward = [labels, classes, batch = ls.n, probs = std::move(probs)](Node<S>& self) {
    Node<S>& ln = *self.parents[0];
    if (!ln.needs_grad) return;
    Tensor<S>& dl = ln.ensure_grad();
    const S gv = self.grad[0] / S(batch);
    for (int n = 0; n < batch; ++n) {
      const S* prow = probs.data() + std::int64_t(n) * classes;
      S* drow = dl.data() + std::int64_t(n) * classes;
      const int y = labels[static_cast<std::size_t>(n)];
      for (int c = 0; c < classes; ++c) drow[c] += gv * (prow[c] - (c == y ? S(1) : S(0)));
    }
  };
  return detail::make_op_node<S>(Tensor<S>::scalar(loss), {logits.ptr()}, std::move(backward));
}

// ---------------------------------------------------------------------------
// elementwise / scalar plumbing for the mixture graphs

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError(strcat("add: shape mismatch ", to_string(a.shape()), " vs ",
                                to_string(b.shape())));
  }
  Tensor<S> out(a.shape(), S(0));
  const std::int64_t m = out.numel();
  const Tensor<S>& av = a.value();
  const Tensor<S>& bv = b.value();
  for (std::int64_t i = 0; i < m; ++i) out[i] = av[i] + bv[i];
  auto backward = [](Node<S>& self) {
    for (auto& p : self.parents)
      if (p->needs_grad) p->accumulate_grad(self.grad);
  };
  return detail::make_op_node<S>(std::move(out), {a.ptr(), b.ptr()}, std::move(backward));
}

// y = s * x with s a one-element variable; gradient reaches both factors.
template <typename S>
Var<S> scale_by(const Var<S>& x, const Var<S>& s) {
  if (s.numel() != 1) {
    throw DimensionError(strcat("scale_by: scale must be a scalar, got ",
                                to_string(s.shape())));
  }
  const S sv = s.value()[0];
  Tensor<S> out(x.shape(), S(0));
  const Tensor<S>& xv = x.value();
  const std::int64_t m = out.numel();
  for (std::int64_t i = 0; i < m; ++i) out[i] = sv * xv[i];
  auto backward = [sv](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    Node<S>& sn = *self.parents[1];
    const Tensor<S>& g = self.grad;
    const std::int64_t m = g.numel();
    if (xn.needs_grad) {
      Tensor<S>& dx = xn.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) dx[i] += sv * g[i];
    }
    if (sn.needs_grad) {
      const Tensor<S>& xv = xn.value;
      S acc = S(0);
      for (std::int64_t i = 0; i < m; ++i) acc += g[i] * xv[i];
      sn.ensure_grad()[0] += acc;
    }
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr(), s.ptr()}, std::move(backward));
}

// y = a*x + b with constant a, b.
template <typename S>
Var<S> affine_elem(const Var<S>& x, S a, S b) {
  Tensor<S> out(x.shape(), S(0));
  const Tensor<S>& xv = x.value();
  const std::int64_t m = out.numel();
  for (std::int64_t i = 0; i < m; ++i) out[i] = a * xv[i] + b;
  auto backward = [a](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    if (!xn.needs_grad) return;
    Tensor<S>& dx = xn.ensure_grad();
    const Tensor<S>& g = self.grad;
    const std::int64_t m = g.numel();
    for (std::int64_t i = 0; i < m; ++i) dx[i] += a * g[i];
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr()}, std::move(backward));
}

template <typename S>
Var<S> sigmoid(const Var<S>& x) {
  Tensor<S> out(x.shape(), S(0));
  const Tensor<S>& xv = x.value();
  const std::int64_t m = out.numel();
  for (std::int64_t i = 0; i < m; ++i) out[i] = detail::stable_sigmoid(xv[i]);
  auto backward = [](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    if (!xn.needs_grad) return;
    Tensor<S>& dx = xn.ensure_grad();
    const Tensor<S>& y = self.value;
    const Tensor<S>& g = self.grad;
    const std::int64_t m = g.numel();
    for (std::int64_t i = 0; i < m; ++i) dx[i] += g[i] * y[i] * (S(1) - y[i]);
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr()}, std::move(backward));
}

// Softmax over all elements of a (small) tensor; maps K raw branch weights
// onto the simplex.
template <typename S>
Var<S> softmax_all(const Var<S>& x) {
  Tensor<S> out(x.shape(), S(0));
  const Tensor<S>& xv = x.value();
  const std::int64_t m = out.numel();
  S mx = xv[0];
  for (std::int64_t i = 1; i < m; ++i) mx = std::max(mx, xv[i]);
  S denom = S(0);
  for (std::int64_t i = 0; i < m; ++i) {
    out[i] = std::exp(xv[i] - mx);
    denom += out[i];
  }
  for (std::int64_t i = 0; i < m; ++i) out[i] /= denom;
  auto backward = [](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    if (!xn.needs_grad) return;
    Tensor<S>& dx = xn.ensure_grad();
    const Tensor<S>& y = self.value;
    const Tensor<S>& g = self.grad;
    const std::int64_t m = g.numel();
    S dot = S(0);
    for (std::int64_t i = 0; i < m; ++i) dot += g[i] * y[i];
    for (std::int64_t i = 0; i < m; ++i) dx[i] += y[i] * (g[i] - dot);
  };
  return detail::make_op_node<S>(std::move(out), {x.ptr()}, std::move(backward));
}

// y = sum_i w[i] * branch_i, with w a K-element variable.
template <typename S>
Var<S> weighted_sum(const Var<S>& weights, const std::vector<Var<S>>& branches) {
  const std::int64_t k = weights.numel();
  if (k != static_cast<std::int64_t>(branches.size())) {
    throw DimensionError(strcat("weighted_sum: ", k, " weights for ", branches.size(),
                                " branches"));
  }
  if (branches.empty()) throw DimensionError("weighted_sum: no branches");
  const Shape4 shape = branches[0].shape();
  for (const auto& b : branches) {
    if (!(b.shape() == shape)) {
      throw DimensionError(strcat("weighted_sum: branch shape mismatch ",
                                  to_string(b.shape()), " vs ", to_string(shape)));
    }
  }
  Tensor<S> out(shape, S(0));
  const std::int64_t m = out.numel();
  const Tensor<S>& wv = weights.value();
  for (std::int64_t j = 0; j < k; ++j) {
    const S w = wv[j];
    const Tensor<S>& bv = branches[static_cast<std::size_t>(j)].value();
    for (std::int64_t i = 0; i < m; ++i) out[i] += w * bv[i];
  }
  std::vector<std::shared_ptr<Node<S>>> parents{weights.ptr()};
  for (const auto& b : branches) parents.push_back(b.ptr());
  auto backward = [k](Node<S>& self) {
    Node<S>& wn = *self.parents[0];
    const Tensor<S>& g = self.grad;
    const std::int64_t m = g.numel();
    const Tensor<S>& wv = wn.value;
    Tensor<S>* dw = wn.needs_grad ? &wn.ensure_grad() : nullptr;
    for (std::int64_t j = 0; j < k; ++j) {
      Node<S>& bn = *self.parents[static_cast<std::size_t>(j + 1)];
      if (dw) {
        const Tensor<S>& bv = bn.value;
        S acc = S(0);
        for (std::int64_t i = 0; i < m; ++i) acc += g[i] * bv[i];
        (*dw)[j] += acc;
      }
      if (bn.needs_grad) {
        Tensor<S>& db = bn.ensure_grad();
        const S w = wv[j];
        for (std::int64_t i = 0; i < m; ++i) db[i] += w * g[i];
      }
    }
  };
  return detail::make_op_node<S>(std::move(out), std::move(parents), std::move(backward));
}

// Scalar <x, weights> against a fixed tensor; handy as a test loss.
template <typename S>
Var<S> inner_with(const Var<S>& x, const Tensor<S>& weights) {
  if (!(x.shape() == weights.shape())) {
    throw DimensionError(strcat("inner_with: shape mismatch ", to_string(x.shape()),
                                " vs ", to_string(weights.shape())));
  }
  const Tensor<S>& xv = x.value();
  S acc = S(0);
  const std::int64_t m = xv.numel();
  for (std::int64_t i = 0; i < m; ++i) acc += xv[i] * weights[i];
  auto backward = [weights](Node<S>& self) {
    Node<S>& xn = *self.parents[0];
    if (!xn.needs_grad) return;
    Tensor<S>& dx = xn.ensure_grad();
    const S gv = self.grad[0];
    const std::int64_t m = dx.numel();
    for (std::int64_t i = 0; i < m; ++i) dx[i] += gv * weights[i];
  };
  return detail::make_op_node<S>(Tensor<S>::scalar(acc), {x.ptr()}, std::move(backward));
}

}  // namespace sa

#endif  // SA_OPS_HPP
