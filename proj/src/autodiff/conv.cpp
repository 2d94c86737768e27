#include "cosearch/autodiff/ops.hpp"

#include "cosearch/core/errors.hpp"

#include <Eigen/Dense>

#include <string>

namespace cosearch::ad {

namespace {

using ColMat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Geometry of a forward convolution: input (N, C, H, W) -> output (N, M, E, F).
struct ConvGeom {
  int n, c, h, w;
  int r, s, stride, pad;
  int e, f;

  int crs() const { return c * r * s; }
  int nef() const { return n * e * f; }
};

ConvGeom make_geom(const Dims4& in, int r, int s, int stride, int pad) {
  if (stride < 1 || pad < 0) throw ShapeError("conv: stride must be >= 1 and padding >= 0");
  ConvGeom g{in.n, in.c, in.h, in.w, r, s, stride, pad, 0, 0};
  const int eh = in.h + 2 * pad - r, ew = in.w + 2 * pad - s;
  if (eh < 0 || ew < 0) throw ShapeError("conv: kernel larger than padded input " + in.str());
  g.e = eh / stride + 1;
  g.f = ew / stride + 1;
  return g;
}

// Column j = (n, e, f), row i = (c, r, s).
ColMat im2col(const double* x, const ConvGeom& g) {
  ColMat cols(g.crs(), g.nef());
  double* out = cols.data();
  for (int n = 0; n < g.n; ++n)
    for (int e = 0; e < g.e; ++e)
      for (int f = 0; f < g.f; ++f)
        for (int c = 0; c < g.c; ++c) {
          const double* plane = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          for (int r = 0; r < g.r; ++r) {
            const int hi = e * g.stride + r - g.pad;
            const bool row_ok = hi >= 0 && hi < g.h;
            for (int s = 0; s < g.s; ++s) {
              const int wi = f * g.stride + s - g.pad;
              *out++ = (row_ok && wi >= 0 && wi < g.w) ? plane[hi * g.w + wi] : 0.0;
            }
          }
        }
  return cols;
}

void col2im_add(const ColMat& cols, double* x, const ConvGeom& g) {
  const double* in = cols.data();
  for (int n = 0; n < g.n; ++n)
    for (int e = 0; e < g.e; ++e)
      for (int f = 0; f < g.f; ++f)
        for (int c = 0; c < g.c; ++c) {
          double* plane = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          for (int r = 0; r < g.r; ++r) {
            const int hi = e * g.stride + r - g.pad;
            const bool row_ok = hi >= 0 && hi < g.h;
            for (int s = 0; s < g.s; ++s, ++in) {
              const int wi = f * g.stride + s - g.pad;
              if (row_ok && wi >= 0 && wi < g.w) plane[hi * g.w + wi] += *in;
            }
          }
        }
}

// (N, K, P) tensor <-> K x (N * P) matrix.
ColMat channels_to_matrix(const Tensor4& t) {
  const auto& d = t.dims();
  const int p = d.h * d.w;
  ColMat m(d.c, static_cast<Eigen::Index>(d.n) * p);
  for (int n = 0; n < d.n; ++n)
    for (int k = 0; k < d.c; ++k) {
      const double* src = t.data() + (static_cast<std::size_t>(n) * d.c + k) * p;
      for (int i = 0; i < p; ++i) m(k, n * p + i) = src[i];
    }
  return m;
}

void matrix_to_channels_add(const ColMat& m, Tensor4& t) {
  const auto& d = t.dims();
  const int p = d.h * d.w;
  for (int n = 0; n < d.n; ++n)
    for (int k = 0; k < d.c; ++k) {
      double* dst = t.data() + (static_cast<std::size_t>(n) * d.c + k) * p;
      for (int i = 0; i < p; ++i) dst[i] += m(k, n * p + i);
    }
}

void check_bias(const Var& b, int channels, const char* op) {
  if (b && b->value.size() != static_cast<std::size_t>(channels))
    throw ShapeError(std::string(op) + ": bias needs " + std::to_string(channels) + " entries");
}

void add_bias(Tensor4& out, const Var& b) {
  if (!b) return;
  const auto& d = out.dims();
  const int p = d.h * d.w;
  for (int n = 0; n < d.n; ++n)
    for (int k = 0; k < d.c; ++k) {
      double* dst = out.data() + (static_cast<std::size_t>(n) * d.c + k) * p;
      const double bk = b->value[k];
      for (int i = 0; i < p; ++i) dst[i] += bk;
    }
}

void bias_grad(const Tensor4& g, const Var& b) {
  if (!b || !b->requires_grad) return;
  const auto& d = g.dims();
  const int p = d.h * d.w;
  auto& gb = b->grad_buffer();
  for (int n = 0; n < d.n; ++n)
    for (int k = 0; k < d.c; ++k) {
      const double* src = g.data() + (static_cast<std::size_t>(n) * d.c + k) * p;
      double acc = 0;
      for (int i = 0; i < p; ++i) acc += src[i];
      gb[k] += acc;
    }
}

}  // namespace

Var conv2d(Tape& tape, const Var& x, const Var& w, const Var& b, int stride, int padding) {
  const Dims4 xd = x->value.dims(), wd = w->value.dims();
  if (xd.c != wd.c)
    throw ShapeError("conv2d: input " + xd.str() + " vs kernel " + wd.str());
  check_bias(b, wd.n, "conv2d");
  const ConvGeom g = make_geom(xd, wd.h, wd.w, stride, padding);
  const int m = wd.n;

  auto cols = std::make_shared<ColMat>(im2col(x->value.data(), g));
  const Eigen::Map<const RowMat> wm(w->value.data(), m, g.crs());
  const ColMat outm = wm * (*cols);

  Tensor4 out({g.n, m, g.e, g.f});
  matrix_to_channels_add(outm, out);
  add_bias(out, b);
  auto y = constant(std::move(out));

  if (tape.tracks({&x, &w, &b})) {
    y->requires_grad = true;
    tape.push([x, w, b, y, cols, g, m] {
      if (y->grad.empty()) return;
      const ColMat gm = channels_to_matrix(y->grad);
      bias_grad(y->grad, b);
      if (w->requires_grad) {
        Eigen::Map<RowMat> gw(w->grad_buffer().data(), m, g.crs());
        gw.noalias() += gm * cols->transpose();
      }
      if (x->requires_grad) {
        const Eigen::Map<const RowMat> wm(w->value.data(), m, g.crs());
        const ColMat gcols = wm.transpose() * gm;
        col2im_add(gcols, x->grad_buffer().data(), g);
      }
    });
  }
  return y;
}

Var transposed_conv2d(Tape& tape, const Var& x, const Var& w, const Var& b, int stride,
                      int padding) {
  const Dims4 xd = x->value.dims(), wd = w->value.dims();
  if (xd.c != wd.n)
    throw ShapeError("transposed_conv2d: input " + xd.str() + " vs kernel " + wd.str());
  if (stride < 1 || padding < 0) throw ShapeError("transposed_conv2d: bad stride/padding");
  const int ho = (xd.h - 1) * stride - 2 * padding + wd.h;
  const int wo = (xd.w - 1) * stride - 2 * padding + wd.w;
  if (ho < 1 || wo < 1) throw ShapeError("transposed_conv2d: non-positive output size");
  check_bias(b, wd.c, "transposed_conv2d");
  // Geometry of the forward convolution this op is the adjoint of.
  const ConvGeom g = make_geom({xd.n, wd.c, ho, wo}, wd.h, wd.w, stride, padding);
  if (g.e != xd.h || g.f != xd.w) throw ShapeError("transposed_conv2d: inconsistent geometry");
  const int m = wd.n;

  auto xm = std::make_shared<ColMat>(channels_to_matrix(x->value));
  const Eigen::Map<const RowMat> wm(w->value.data(), m, g.crs());
  const ColMat cols = wm.transpose() * (*xm);
  Tensor4 out({xd.n, wd.c, ho, wo});
  col2im_add(cols, out.data(), g);
  add_bias(out, b);
  auto y = constant(std::move(out));

  if (tape.tracks({&x, &w, &b})) {
    y->requires_grad = true;
    tape.push([x, w, b, y, xm, g, m] {
      if (y->grad.empty()) return;
      bias_grad(y->grad, b);
      const ColMat gcols = im2col(y->grad.data(), g);
      if (w->requires_grad) {
        Eigen::Map<RowMat> gw(w->grad_buffer().data(), m, g.crs());
        gw.noalias() += (*xm) * gcols.transpose();
      }
      if (x->requires_grad) {
        const Eigen::Map<const RowMat> wm(w->value.data(), m, g.crs());
        const ColMat gx = wm * gcols;
        matrix_to_channels_add(gx, x->grad_buffer());
      }
    });
  }
  return y;
}

Var depthwise_conv2d(Tape& tape, const Var& x, const Var& w, const Var& b, int stride,
                     int padding) {
  const Dims4 xd = x->value.dims(), wd = w->value.dims();
  if (wd.n != xd.c || wd.c != 1)
    throw ShapeError("depthwise_conv2d: input " + xd.str() + " vs kernel " + wd.str());
  check_bias(b, xd.c, "depthwise_conv2d");
  const ConvGeom g = make_geom(xd, wd.h, wd.w, stride, padding);

  Tensor4 out({xd.n, xd.c, g.e, g.f});
  const Tensor4& xv = x->value;
  const Tensor4& wv = w->value;
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c)
      for (int e = 0; e < g.e; ++e)
        for (int f = 0; f < g.f; ++f) {
          double acc = 0;
          for (int r = 0; r < g.r; ++r) {
            const int hi = e * g.stride + r - g.pad;
            if (hi < 0 || hi >= g.h) continue;
            for (int s = 0; s < g.s; ++s) {
              const int wi = f * g.stride + s - g.pad;
              if (wi < 0 || wi >= g.w) continue;
              acc += wv.at(c, 0, r, s) * xv.at(n, c, hi, wi);
            }
          }
          out.at(n, c, e, f) = acc;
        }
  add_bias(out, b);
  auto y = constant(std::move(out));

  if (tape.tracks({&x, &w, &b})) {
    y->requires_grad = true;
    tape.push([x, w, b, y, g] {
      if (y->grad.empty()) return;
      bias_grad(y->grad, b);
      const Tensor4& gy = y->grad;
      Tensor4* gx = x->requires_grad ? &x->grad_buffer() : nullptr;
      Tensor4* gw = w->requires_grad ? &w->grad_buffer() : nullptr;
      for (int n = 0; n < g.n; ++n)
        for (int c = 0; c < g.c; ++c)
          for (int e = 0; e < g.e; ++e)
            for (int f = 0; f < g.f; ++f) {
              const double go = gy.at(n, c, e, f);
              for (int r = 0; r < g.r; ++r) {
                const int hi = e * g.stride + r - g.pad;
                if (hi < 0 || hi >= g.h) continue;
                for (int s = 0; s < g.s; ++s) {
                  const int wi = f * g.stride + s - g.pad;
                  if (wi < 0 || wi >= g.w) continue;
                  if (gw) gw->at(c, 0, r, s) += go * x->value.at(n, c, hi, wi);
                  if (gx) gx->at(n, c, hi, wi) += go * w->value.at(c, 0, r, s);
                }
              }
            }
    });
  }
  return y;
}

}  // namespace cosearch::ad
