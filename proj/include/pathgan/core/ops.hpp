#pragma once

// Differentiable building blocks for the generator, critic and mapper.
// Convolutions lower to one batched GEMM each (im2col for k×k kernels,
// reshuffles for the 2×2 stride-2 up/down layers).

#include <cmath>
#include <cstring>
#include <memory>

#include <Eigen/Core>

#include "pathgan/core/autograd.hpp"

namespace pathgan::nn {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

namespace detail {

inline void require_rank(const Tensor& t, std::size_t r, const char* op) {
  if (t.rank() != r)
    throw ArgumentError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                        shape_str(t.shape()));
}

// [N, C, P] -> [C, N*P]
inline void nchw_to_cnp(const float* src, float* dst, std::int64_t n, std::int64_t c, std::int64_t p) {
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      std::memcpy(dst + (j * n + i) * p, src + (i * c + j) * p, sizeof(float) * p);
}

// [C, N*P] -> [N, C, P]
inline void cnp_to_nchw(const float* src, float* dst, std::int64_t n, std::int64_t c, std::int64_t p) {
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      std::memcpy(dst + (i * c + j) * p, src + (j * n + i) * p, sizeof(float) * p);
}

struct ConvGeom {
  std::int64_t n, c, h, w, k, stride, pad, ho, wo;
};

inline void im2col(const float* x, float* cols, const ConvGeom& g) {
  const std::int64_t np = g.n * g.ho * g.wo;
  for (std::int64_t c = 0; c < g.c; ++c)
    for (std::int64_t ky = 0; ky < g.k; ++ky)
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        float* row = cols + ((c * g.k + ky) * g.k + kx) * np;
        for (std::int64_t n = 0; n < g.n; ++n) {
          const float* plane = x + (n * g.c + c) * g.h * g.w;
          for (std::int64_t oy = 0; oy < g.ho; ++oy) {
            float* out = row + (n * g.ho + oy) * g.wo;
            const std::int64_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) {
              std::fill(out, out + g.wo, 0.0f);
              continue;
            }
            const float* in = plane + iy * g.w;
            for (std::int64_t ox = 0; ox < g.wo; ++ox) {
              const std::int64_t ix = ox * g.stride - g.pad + kx;
              out[ox] = (ix >= 0 && ix < g.w) ? in[ix] : 0.0f;
            }
          }
        }
      }
}

inline void col2im_add(const float* cols, float* x, const ConvGeom& g) {
  const std::int64_t np = g.n * g.ho * g.wo;
  for (std::int64_t c = 0; c < g.c; ++c)
    for (std::int64_t ky = 0; ky < g.k; ++ky)
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const float* row = cols + ((c * g.k + ky) * g.k + kx) * np;
        for (std::int64_t n = 0; n < g.n; ++n) {
          float* plane = x + (n * g.c + c) * g.h * g.w;
          for (std::int64_t oy = 0; oy < g.ho; ++oy) {
            const std::int64_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) continue;
            const float* in = row + (n * g.ho + oy) * g.wo;
            float* out = plane + iy * g.w;
            for (std::int64_t ox = 0; ox < g.wo; ++ox) {
              const std::int64_t ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.w) out[ix] += in[ox];
            }
          }
        }
      }
}

} // namespace detail

/// y = x Wᵀ + b with x [N, in], W [out, in], b [out].
inline Var dense(const Var& x, const Var& w, const Var& b) {
  detail::require_rank(x->value, 2, "dense");
  const auto n = x->value.dim(0), in = x->value.dim(1), out = w->value.dim(0);
  if (w->value.dim(1) != in) throw ConfigError("dense: weight " + shape_str(w->value.shape()) +
                                               " incompatible with input " + shape_str(x->value.shape()));
  Tensor y({n, out});
  MapR Y(y.data(), n, out);
  Y.noalias() = CMapR(x->value.data(), n, in) * CMapR(w->value.data(), out, in).transpose();
  if (b) Y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(b->value.data(), out);
  return make_op(std::move(y), {x, w, b}, [n, in, out](Node& self) {
    auto& X = self.parents[0];
    auto& W = self.parents[1];
    auto& B = self.parents[2];
    CMapR G(self.grad.data(), n, out);
    if (needs_grad(X))
      MapR(X->grad_buffer().data(), n, in).noalias() += G * CMapR(W->value.data(), out, in);
    if (needs_grad(W))
      MapR(W->grad_buffer().data(), out, in).noalias() += G.transpose() * CMapR(X->value.data(), n, in);
    if (needs_grad(B))
      Eigen::Map<Eigen::RowVectorXf>(B->grad_buffer().data(), out) += G.colwise().sum();
  });
}

/// 2-D convolution, x [N,C,H,W], w [O,C,k,k], square kernel.
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  detail::require_rank(x->value, 4, "conv2d");
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (ws.size() != 4 || ws[1] != xs[1] || ws[2] != ws[3])
    throw ConfigError("conv2d: weight " + shape_str(ws) + " incompatible with input " + shape_str(xs));
  detail::ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[2], stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  const std::int64_t o = ws[0], ck = g.c * g.k * g.k, np = g.n * g.ho * g.wo, p = g.ho * g.wo;
  auto cols = std::make_shared<FloatBuffer>(static_cast<std::size_t>(ck * np));
  detail::im2col(x->value.data(), cols->data(), g);
  FloatBuffer yc(static_cast<std::size_t>(o * np));
  MapR Y(yc.data(), o, np);
  Y.noalias() = CMapR(w->value.data(), o, ck) * CMapR(cols->data(), ck, np);
  if (b) Y.colwise() += Eigen::Map<const Eigen::VectorXf>(b->value.data(), o);
  Tensor y({g.n, o, g.ho, g.wo});
  detail::cnp_to_nchw(yc.data(), y.data(), g.n, o, p);
  if (!grad_mode()) cols.reset();
  return make_op(std::move(y), {x, w, b}, [g, o, ck, np, p, cols](Node& self) {
    auto& X = self.parents[0];
    auto& W = self.parents[1];
    auto& B = self.parents[2];
    FloatBuffer gy(static_cast<std::size_t>(o * np));
    detail::nchw_to_cnp(self.grad.data(), gy.data(), g.n, o, p);
    CMapR G(gy.data(), o, np);
    if (needs_grad(B)) Eigen::Map<Eigen::VectorXf>(B->grad_buffer().data(), o) += G.rowwise().sum();
    if (needs_grad(W))
      MapR(W->grad_buffer().data(), o, ck).noalias() += G * CMapR(cols->data(), ck, np).transpose();
    if (needs_grad(X)) {
      FloatBuffer dcols(static_cast<std::size_t>(ck * np));
      MapR(dcols.data(), ck, np).noalias() = CMapR(W->value.data(), o, ck).transpose() * G;
      detail::col2im_add(dcols.data(), X->grad_buffer().data(), g);
    }
  });
}

/// Transposed convolution, kernel 2, stride 2: x [N,C,H,W], w [C,O,2,2] -> [N,O,2H,2W].
inline Var conv_transpose2x2(const Var& x, const Var& w, const Var& b) {
  detail::require_rank(x->value, 4, "conv_transpose2x2");
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (ws.size() != 4 || ws[0] != xs[1] || ws[2] != 2 || ws[3] != 2)
    throw ConfigError("conv_transpose2x2: weight " + shape_str(ws) + " incompatible with input " +
                      shape_str(xs));
  const std::int64_t n = xs[0], c = xs[1], h = xs[2], wd = xs[3], o = ws[1], p = h * wd, np = n * p;
  auto xc = std::make_shared<FloatBuffer>(static_cast<std::size_t>(c * np));
  detail::nchw_to_cnp(x->value.data(), xc->data(), n, c, p);
  FloatBuffer r(static_cast<std::size_t>(o * 4 * np));
  MapR(r.data(), o * 4, np).noalias() =
      CMapR(w->value.data(), c, o * 4).transpose() * CMapR(xc->data(), c, np);
  Tensor y({n, o, 2 * h, 2 * wd});
  float* yd = y.data();
  for (std::int64_t oc = 0; oc < o; ++oc) {
    const float bias = b ? b->value[oc] : 0.0f;
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const float* row = r.data() + ((oc * 2 + dy) * 2 + dx) * np;
        for (std::int64_t i = 0; i < n; ++i) {
          float* plane = yd + (i * o + oc) * 4 * p;
          for (std::int64_t yy = 0; yy < h; ++yy)
            for (std::int64_t xx = 0; xx < wd; ++xx)
              plane[(2 * yy + dy) * 2 * wd + 2 * xx + dx] = row[i * p + yy * wd + xx] + bias;
        }
      }
  }
  if (!grad_mode()) xc.reset();
  return make_op(std::move(y), {x, w, b}, [n, c, h, wd, o, p, np, xc](Node& self) {
    auto& X = self.parents[0];
    auto& W = self.parents[1];
    auto& B = self.parents[2];
    FloatBuffer gr(static_cast<std::size_t>(o * 4 * np));
    const float* gd = self.grad.data();
    for (std::int64_t oc = 0; oc < o; ++oc)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          float* row = gr.data() + ((oc * 2 + dy) * 2 + dx) * np;
          for (std::int64_t i = 0; i < n; ++i) {
            const float* plane = gd + (i * o + oc) * 4 * p;
            for (std::int64_t yy = 0; yy < h; ++yy)
              for (std::int64_t xx = 0; xx < wd; ++xx)
                row[i * p + yy * wd + xx] = plane[(2 * yy + dy) * 2 * wd + 2 * xx + dx];
          }
        }
    CMapR G(gr.data(), o * 4, np);
    if (needs_grad(B)) {
      Eigen::VectorXf rows = G.rowwise().sum();
      float* bg = B->grad_buffer().data();
      for (std::int64_t oc = 0; oc < o; ++oc) bg[oc] += rows.segment(oc * 4, 4).sum();
    }
    if (needs_grad(W))
      MapR(W->grad_buffer().data(), c, o * 4).noalias() += CMapR(xc->data(), c, np) * G.transpose();
    if (needs_grad(X)) {
      FloatBuffer dx(static_cast<std::size_t>(c * np));
      MapR(dx.data(), c, np).noalias() = CMapR(W->value.data(), c, o * 4) * G;
      FloatBuffer dn(static_cast<std::size_t>(c * np));
      detail::cnp_to_nchw(dx.data(), dn.data(), n, c, p);
      float* xg = X->grad_buffer().data();
      for (std::size_t i = 0; i < dn.size(); ++i) xg[i] += dn[i];
    }
  });
}

inline Var leaky_relu(const Var& x, float slope) {
  Tensor y = x->value;
  for (auto& v : y.values()) v = v > 0.0f ? v : slope * v;
  return make_op(std::move(y), {x}, [slope](Node& self) {
    auto& X = self.parents[0];
    float* g = X->grad_buffer().data();
    const float* xv = X->value.data();
    const float* go = self.grad.data();
    for (std::int64_t i = 0; i < X->value.numel(); ++i) g[i] += xv[i] > 0.0f ? go[i] : slope * go[i];
  });
}

inline Var relu(const Var& x) { return leaky_relu(x, 0.0f); }

/// Logistic sigmoid, clamped so float outputs stay strictly inside (0, 1).
inline Var sigmoid(const Var& x) {
  constexpr float lo = 1e-7f;
  constexpr float hi = 1.0f - 1e-7f;
  Tensor y = x->value;
  for (auto& v : y.values()) v = std::clamp(1.0f / (1.0f + std::exp(-v)), lo, hi);
  return make_op(std::move(y), {x}, [](Node& self) {
    auto& X = self.parents[0];
    float* g = X->grad_buffer().data();
    const float* s = self.value.data();
    const float* go = self.grad.data();
    for (std::int64_t i = 0; i < self.value.numel(); ++i) g[i] += go[i] * s[i] * (1.0f - s[i]);
  });
}

inline Var add(const Var& a, const Var& b) {
  if (a->value.shape() != b->value.shape())
    throw ArgumentError("add: shape mismatch " + shape_str(a->value.shape()) + " vs " +
                        shape_str(b->value.shape()));
  Tensor y = a->value;
  y.add_(b->value);
  return make_op(std::move(y), {a, b}, [](Node& self) {
    for (int i = 0; i < 2; ++i)
      if (needs_grad(self.parents[i])) self.parents[i]->grad_buffer().add_(self.grad);
  });
}

/// y = gamma * x with a learned scalar gamma of shape [1].
inline Var scale_by(const Var& x, const Var& gamma) {
  Tensor y = x->value;
  y.scale_(gamma->value[0]);
  return make_op(std::move(y), {x, gamma}, [](Node& self) {
    auto& X = self.parents[0];
    auto& Gm = self.parents[1];
    const float gv = Gm->value[0];
    if (needs_grad(X)) {
      float* g = X->grad_buffer().data();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) g[i] += gv * self.grad[i];
    }
    if (needs_grad(Gm)) {
      double s = 0.0;
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) s += double(self.grad[i]) * X->value[i];
      Gm->grad_buffer()[0] += static_cast<float>(s);
    }
  });
}

inline Var reshape(const Var& x, Shape shape) {
  Tensor y = x->value.reshaped(std::move(shape));
  return make_op(std::move(y), {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const float* src = self.grad.data();
    for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += src[i];
  });
}

/// Concatenates along the batch (first) dimension.
inline Var concat_batch(const Var& a, const Var& b) {
  Shape s = a->value.shape();
  Shape sb = b->value.shape();
  if (s.size() != sb.size() || !std::equal(s.begin() + 1, s.end(), sb.begin() + 1))
    throw ArgumentError("concat_batch: incompatible shapes");
  s[0] += sb[0];
  Tensor y(s);
  std::copy(a->value.values().begin(), a->value.values().end(), y.data());
  std::copy(b->value.values().begin(), b->value.values().end(), y.data() + a->value.numel());
  const auto na = a->value.numel();
  return make_op(std::move(y), {a, b}, [na](Node& self) {
    auto& A = self.parents[0];
    auto& B = self.parents[1];
    if (needs_grad(A)) {
      float* g = A->grad_buffer().data();
      for (std::int64_t i = 0; i < na; ++i) g[i] += self.grad[i];
    }
    if (needs_grad(B)) {
      float* g = B->grad_buffer().data();
      for (std::int64_t i = 0; i < B->value.numel(); ++i) g[i] += self.grad[na + i];
    }
  });
}

/// Rows [begin, end) of the batch dimension.
inline Var slice_batch(const Var& x, std::int64_t begin, std::int64_t end) {
  Shape s = x->value.shape();
  if (begin < 0 || end > s[0] || begin >= end) throw ArgumentError("slice_batch: bad range");
  const std::int64_t row = x->value.numel() / s[0];
  s[0] = end - begin;
  Tensor y(s);
  std::copy(x->value.data() + begin * row, x->value.data() + end * row, y.data());
  return make_op(std::move(y), {x}, [begin, row](Node& self) {
    float* g = self.parents[0]->grad_buffer().data() + begin * row;
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) g[i] += self.grad[i];
  });
}

/// Adaptive instance normalization on feature maps.
/// x [N,C,H,W]; style [N,2C] holds per-channel scale (first C) and bias.
/// y = scale * (x - mean) / (std + eps) + bias, statistics over H×W.
inline Var adain2d(const Var& x, const Var& style, float eps = 1e-8f) {
  detail::require_rank(x->value, 4, "adain2d");
  const auto n = x->value.dim(0), c = x->value.dim(1), m = x->value.dim(2) * x->value.dim(3);
  if (style->value.rank() != 2 || style->value.dim(0) != n || style->value.dim(1) != 2 * c)
    throw ConfigError("adain2d: style " + shape_str(style->value.shape()) + " does not match " +
                      shape_str(x->value.shape()));
  auto stats = std::make_shared<std::vector<double>>(static_cast<std::size_t>(2 * n * c));
  Tensor y(x->value.shape());
  for (std::int64_t i = 0; i < n * c; ++i) {
    const float* xv = x->value.data() + i * m;
    double mu = 0.0;
    for (std::int64_t j = 0; j < m; ++j) mu += xv[j];
    mu /= double(m);
    double var = 0.0;
    for (std::int64_t j = 0; j < m; ++j) var += (xv[j] - mu) * (xv[j] - mu);
    const double sd = std::sqrt(var / double(m));
    (*stats)[2 * i] = mu;
    (*stats)[2 * i + 1] = sd;
    const std::int64_t ni = i / c, ci = i % c;
    const double s = style->value[ni * 2 * c + ci];
    const double bias = style->value[ni * 2 * c + c + ci];
    float* yv = y.data() + i * m;
    for (std::int64_t j = 0; j < m; ++j) yv[j] = static_cast<float>(s * ((xv[j] - mu) / (sd + eps)) + bias);
  }
  return make_op(std::move(y), {x, style}, [n, c, m, eps, stats](Node& self) {
    auto& X = self.parents[0];
    auto& S = self.parents[1];
    float* gx = needs_grad(X) ? X->grad_buffer().data() : nullptr;
    float* gs = needs_grad(S) ? S->grad_buffer().data() : nullptr;
    for (std::int64_t i = 0; i < n * c; ++i) {
      const std::int64_t ni = i / c, ci = i % c;
      const double mu = (*stats)[2 * i], sd = (*stats)[2 * i + 1], d = sd + eps;
      const double s = S->value[ni * 2 * c + ci];
      const float* xv = X->value.data() + i * m;
      const float* go = self.grad.data() + i * m;
      double sum_g = 0.0, sum_gxhat = 0.0;
      for (std::int64_t j = 0; j < m; ++j) {
        sum_g += go[j];
        sum_gxhat += go[j] * ((xv[j] - mu) / d);
      }
      if (gs) {
        gs[ni * 2 * c + ci] += static_cast<float>(sum_gxhat);
        gs[ni * 2 * c + c + ci] += static_cast<float>(sum_g);
      }
      if (gx) {
        // d/dx of s*(x-mu)/(sd+eps) with population sd.
        const double mean_g = s * sum_g / double(m);
        const double corr = sd > 0.0 ? s * sum_gxhat * d / (d * d * double(m) * sd) : 0.0;
        for (std::int64_t j = 0; j < m; ++j)
          gx[i * m + j] += static_cast<float>((s * go[j] - mean_g) / d - corr * (xv[j] - mu));
      }
    }
  });
}

/// AdaIN for dense activations x [N,F]: normalizes across the F units,
/// then applies a per-unit scale/bias from style [N,2F].
inline Var adain_dense(const Var& x, const Var& style, float eps = 1e-8f) {
  detail::require_rank(x->value, 2, "adain_dense");
  const auto n = x->value.dim(0), f = x->value.dim(1);
  if (style->value.rank() != 2 || style->value.dim(0) != n || style->value.dim(1) != 2 * f)
    throw ConfigError("adain_dense: style shape mismatch");
  auto stats = std::make_shared<std::vector<double>>(static_cast<std::size_t>(2 * n));
  Tensor y(x->value.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    const float* xv = x->value.data() + i * f;
    double mu = 0.0;
    for (std::int64_t j = 0; j < f; ++j) mu += xv[j];
    mu /= double(f);
    double var = 0.0;
    for (std::int64_t j = 0; j < f; ++j) var += (xv[j] - mu) * (xv[j] - mu);
    const double sd = std::sqrt(var / double(f));
    (*stats)[2 * i] = mu;
    (*stats)[2 * i + 1] = sd;
    const float* st = style->value.data() + i * 2 * f;
    float* yv = y.data() + i * f;
    for (std::int64_t j = 0; j < f; ++j) yv[j] = static_cast<float>(st[j] * ((xv[j] - mu) / (sd + eps)) + st[f + j]);
  }
  return make_op(std::move(y), {x, style}, [n, f, eps, stats](Node& self) {
    auto& X = self.parents[0];
    auto& S = self.parents[1];
    float* gx = needs_grad(X) ? X->grad_buffer().data() : nullptr;
    float* gs = needs_grad(S) ? S->grad_buffer().data() : nullptr;
    for (std::int64_t i = 0; i < n; ++i) {
      const double mu = (*stats)[2 * i], sd = (*stats)[2 * i + 1], d = sd + eps;
      const float* xv = X->value.data() + i * f;
      const float* st = S->value.data() + i * 2 * f;
      const float* go = self.grad.data() + i * f;
      double sum_gh = 0.0, sum_gh_xhat = 0.0;
      for (std::int64_t j = 0; j < f; ++j) {
        const double xhat = (xv[j] - mu) / d;
        const double gh = double(go[j]) * st[j];
        sum_gh += gh;
        sum_gh_xhat += gh * xhat;
        if (gs) {
          gs[i * 2 * f + j] += static_cast<float>(go[j] * xhat);
          gs[i * 2 * f + f + j] += go[j];
        }
      }
      if (gx) {
        const double corr = sd > 0.0 ? sum_gh_xhat / (d * double(f) * sd) : 0.0;
        for (std::int64_t j = 0; j < f; ++j) {
          const double gh = double(go[j]) * st[j];
          gx[i * f + j] += static_cast<float>((gh - sum_gh / double(f)) / d - corr * (xv[j] - mu));
        }
      }
    }
  });
}

/// Row-softmax attention map A[i,j] = softmax_j(q_i · k_j) for one image.
/// q, k are [K, P] row-major (channels × positions).
inline MatR attention_map(const float* q, const float* k, std::int64_t kc, std::int64_t p) {
  MatR s = CMapR(q, kc, p).transpose() * CMapR(k, kc, p);
  for (std::int64_t i = 0; i < p; ++i) {
    const float mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp();
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

/// Core of SAGAN-style self-attention: o_i = Σ_j A[i,j] v_j with
/// q, k [N,K,H,W] and v [N,C,H,W].
inline Var attention_core(const Var& q, const Var& k, const Var& v) {
  detail::require_rank(q->value, 4, "attention_core");
  const auto n = q->value.dim(0), kc = q->value.dim(1), p = q->value.dim(2) * q->value.dim(3);
  const auto c = v->value.dim(1);
  if (k->value.shape() != q->value.shape() || v->value.dim(0) != n ||
      v->value.dim(2) * v->value.dim(3) != p)
    throw ConfigError("attention_core: q/k/v shapes disagree");
  auto maps = std::make_shared<std::vector<MatR>>();
  maps->reserve(static_cast<std::size_t>(n));
  Tensor o(v->value.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    MatR a = attention_map(q->value.data() + i * kc * p, k->value.data() + i * kc * p, kc, p);
    MapR(o.data() + i * c * p, c, p).noalias() = CMapR(v->value.data() + i * c * p, c, p) * a.transpose();
    maps->push_back(std::move(a));
  }
  return make_op(std::move(o), {q, k, v}, [n, kc, p, c, maps](Node& self) {
    auto& Q = self.parents[0];
    auto& K = self.parents[1];
    auto& V = self.parents[2];
    for (std::int64_t i = 0; i < n; ++i) {
      const MatR& a = (*maps)[static_cast<std::size_t>(i)];
      CMapR go(self.grad.data() + i * c * p, c, p);
      CMapR vv(V->value.data() + i * c * p, c, p);
      if (needs_grad(V)) MapR(V->grad_buffer().data() + i * c * p, c, p).noalias() += go * a;
      if (!needs_grad(Q) && !needs_grad(K)) continue;
      MatR da = go.transpose() * vv;
      MatR ds = a.cwiseProduct(da);
      Eigen::VectorXf rs = ds.rowwise().sum();
      ds -= (a.array().colwise() * rs.array()).matrix();
      CMapR qq(Q->value.data() + i * kc * p, kc, p);
      CMapR kk(K->value.data() + i * kc * p, kc, p);
      if (needs_grad(Q)) MapR(Q->grad_buffer().data() + i * kc * p, kc, p).noalias() += kk * ds.transpose();
      if (needs_grad(K)) MapR(K->grad_buffer().data() + i * kc * p, kc, p).noalias() += qq * ds;
    }
  });
}

} // namespace pathgan::nn
