#include "cosearch/autodiff/ops.hpp"

#include "cosearch/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cosearch::ad {

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
  if (!(a->value.dims() == b->value.dims()))
    throw ShapeError(std::string(op) + ": " + a->value.dims().str() + " vs " +
                     b->value.dims().str());
}

Var scalar_var(double v) { return constant(Tensor4({1, 1, 1, 1}, v)); }

// y = softmax(z), dz += (J^T gy) / tau with J = diag(y) - y y^T.
void softmax_backward(const Tensor4& y, const Tensor4& gy, Tensor4& gz, double tau) {
  double dotp = 0;
  for (std::size_t i = 0; i < y.size(); ++i) dotp += y[i] * gy[i];
  for (std::size_t i = 0; i < y.size(); ++i) gz[i] += y[i] * (gy[i] - dotp) / tau;
}

Tensor4 softmax_values(const Tensor4& z, std::span<const double> noise, double tau) {
  Tensor4 y(z.dims());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) {
    y[i] = (z[i] + (noise.empty() ? 0.0 : noise[i])) / tau;
    mx = std::max(mx, y[i]);
  }
  double total = 0;
  for (auto& v : y.values()) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : y.values()) v /= total;
  return y;
}

}  // namespace

Var maxpool2d(Tape& tape, const Var& x, int kernel, int stride) {
  const Dims4 d = x->value.dims();
  if (kernel < 1 || stride < 1 || d.h < kernel || d.w < kernel)
    throw ShapeError("maxpool2d: window " + std::to_string(kernel) + " on " + d.str());
  const int eh = (d.h - kernel) / stride + 1, ew = (d.w - kernel) / stride + 1;
  Tensor4 out({d.n, d.c, eh, ew});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  std::size_t o = 0;
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int e = 0; e < eh; ++e)
        for (int f = 0; f < ew; ++f, ++o) {
          std::size_t best = x->value.index(n, c, e * stride, f * stride);
          for (int r = 0; r < kernel; ++r)
            for (int s = 0; s < kernel; ++s) {
              const std::size_t i = x->value.index(n, c, e * stride + r, f * stride + s);
              if (x->value[i] > x->value[best]) best = i;
            }
          (*argmax)[o] = best;
          out[o] = x->value[best];
        }
  auto y = constant(std::move(out));
  if (tape.tracks({&x})) {
    y->requires_grad = true;
    tape.push([x, y, argmax] {
      if (y->grad.empty()) return;
      auto& gx = x->grad_buffer();
      for (std::size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += y->grad[i];
    });
  }
  return y;
}

Var upsample_nearest(Tape& tape, const Var& x, int factor) {
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  const Dims4 d = x->value.dims();
  Tensor4 out({d.n, d.c, d.h * factor, d.w * factor});
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int h = 0; h < d.h * factor; ++h)
        for (int w = 0; w < d.w * factor; ++w)
          out.at(n, c, h, w) = x->value.at(n, c, h / factor, w / factor);
  auto y = constant(std::move(out));
  if (tape.tracks({&x})) {
    y->requires_grad = true;
    tape.push([x, y, factor, d] {
      if (y->grad.empty()) return;
      auto& gx = x->grad_buffer();
      for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
          for (int h = 0; h < d.h * factor; ++h)
            for (int w = 0; w < d.w * factor; ++w)
              gx.at(n, c, h / factor, w / factor) += y->grad.at(n, c, h, w);
    });
  }
  return y;
}

Var relu(Tape& tape, const Var& x) {
  Tensor4 out(x->value.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] > 0 ? x->value[i] : 0.0;
  auto y = constant(std::move(out));
  if (tape.tracks({&x})) {
    y->requires_grad = true;
    tape.push([x, y] {
      if (y->grad.empty()) return;
      auto& gx = x->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i)
        if (x->value[i] > 0) gx[i] += y->grad[i];
    });
  }
  return y;
}

Var add(Tape& tape, const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor4 out = a->value;
  out += b->value;
  auto y = constant(std::move(out));
  if (tape.tracks({&a, &b})) {
    y->requires_grad = true;
    tape.push([a, b, y] {
      if (y->grad.empty()) return;
      if (a->requires_grad) a->grad_buffer() += y->grad;
      if (b->requires_grad) b->grad_buffer() += y->grad;
    });
  }
  return y;
}

Var scale(Tape& tape, const Var& x, double factor) {
  Tensor4 out = x->value;
  for (auto& v : out.values()) v *= factor;
  auto y = constant(std::move(out));
  if (tape.tracks({&x})) {
    y->requires_grad = true;
    tape.push([x, y, factor] {
      if (y->grad.empty()) return;
      auto& gx = x->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * y->grad[i];
    });
  }
  return y;
}

Var sum(Tape& tape, const Var& x) {
  double acc = 0;
  for (double v : x->value.values()) acc += v;
  auto y = scalar_var(acc);
  if (tape.tracks({&x})) {
    y->requires_grad = true;
    tape.push([x, y] {
      if (y->grad.empty()) return;
      auto& gx = x->grad_buffer();
      for (auto& g : gx.values()) g += y->grad[0];
    });
  }
  return y;
}

Var dot(Tape& tape, const Var& x, std::span<const double> coeffs) {
  if (coeffs.size() != x->value.size())
    throw ShapeError("dot: " + std::to_string(coeffs.size()) + " coefficients for " +
                     x->value.dims().str());
  double acc = 0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * x->value[i];
  auto y = scalar_var(acc);
  if (tape.tracks({&x})) {
    y->requires_grad = true;
    std::vector<double> c(coeffs.begin(), coeffs.end());
    tape.push([x, y, c = std::move(c)] {
      if (y->grad.empty()) return;
      auto& gx = x->grad_buffer();
      for (std::size_t i = 0; i < c.size(); ++i) gx[i] += c[i] * y->grad[0];
    });
  }
  return y;
}

Var mix(Tape& tape, std::span<const Var> candidates, const Var& weights) {
  if (candidates.empty() || candidates.size() != weights->value.size())
    throw ShapeError("mix: " + std::to_string(candidates.size()) + " candidates for " +
                     std::to_string(weights->value.size()) + " weights");
  for (const auto& c : candidates) require_same(c, candidates.front(), "mix");
  Tensor4 out(candidates.front()->value.dims());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double wk = weights->value[k];
    const auto& v = candidates[k]->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wk * v[i];
  }
  auto y = constant(std::move(out));
  bool track = tape.tracks({&weights});
  for (const auto& c : candidates) track = track || tape.tracks({&c});
  if (track) {
    y->requires_grad = true;
    std::vector<Var> cands(candidates.begin(), candidates.end());
    tape.push([cands = std::move(cands), weights, y] {
      if (y->grad.empty()) return;
      const auto& gy = y->grad;
      for (std::size_t k = 0; k < cands.size(); ++k) {
        const Var& c = cands[k];
        if (weights->requires_grad) {
          double acc = 0;
          for (std::size_t i = 0; i < gy.size(); ++i) acc += gy[i] * c->value[i];
          weights->grad_buffer()[k] += acc;
        }
        if (c->requires_grad) {
          const double wk = weights->value[k];
          auto& gc = c->grad_buffer();
          for (std::size_t i = 0; i < gy.size(); ++i) gc[i] += wk * gy[i];
        }
      }
    });
  }
  return y;
}

Var softmax(Tape& tape, const Var& logits) { return gumbel_softmax(tape, logits, {}, 1.0); }

Var gumbel_softmax(Tape& tape, const Var& logits, std::span<const double> gumbels, double tau) {
  if (!(tau > 0)) throw ParameterError("gumbel_softmax: temperature must be positive");
  if (logits->value.size() == 0) throw ShapeError("gumbel_softmax: empty logits");
  if (!gumbels.empty() && gumbels.size() != logits->value.size())
    throw ShapeError("gumbel_softmax: noise length mismatch");
  auto y = constant(softmax_values(logits->value, gumbels, tau));
  if (tape.tracks({&logits})) {
    y->requires_grad = true;
    tape.push([logits, y, tau] {
      if (y->grad.empty()) return;
      softmax_backward(y->value, y->grad, logits->grad_buffer(), tau);
    });
  }
  return y;
}

std::vector<double> sample_gumbels(std::mt19937_64& rng, std::size_t k) {
  std::vector<double> g(k);
  for (auto& v : g) v = -std::log(-std::log(uniform_open(rng)));
  return g;
}

LossResult pearson_loss(Tape& tape, const Var& pred, const Var& target) {
  require_same(pred, target, "pearson_loss");
  const Dims4 d = pred->value.dims();
  const std::size_t per = d.size() / static_cast<std::size_t>(d.n);
  if (per < 2) throw ShapeError("pearson_loss: need at least 2 values per sample");

  // Per-sample centered values and moments, kept for the backward pass.
  struct Sample {
    double sxx = 0, syy = 0, sxy = 0;
    bool degenerate = false;
  };
  auto stats = std::make_shared<std::vector<Sample>>(d.n);
  auto centered = std::make_shared<std::vector<double>>(2 * d.size());
  LossResult result;
  double total = 0;
  for (int n = 0; n < d.n; ++n) {
    const double* x = pred->value.data() + n * per;
    const double* t = target->value.data() + n * per;
    double* cx = centered->data() + n * per;
    double* ct = centered->data() + d.size() + n * per;
    double mx = 0, mt = 0;
    for (std::size_t i = 0; i < per; ++i) {
      mx += x[i];
      mt += t[i];
    }
    mx /= static_cast<double>(per);
    mt /= static_cast<double>(per);
    Sample& s = (*stats)[n];
    for (std::size_t i = 0; i < per; ++i) {
      cx[i] = x[i] - mx;
      ct[i] = t[i] - mt;
      s.sxx += cx[i] * cx[i];
      s.syy += ct[i] * ct[i];
      s.sxy += cx[i] * ct[i];
    }
    s.degenerate = s.sxx == 0.0 || s.syy == 0.0;
    if (s.degenerate) {
      result.degenerate = true;
      continue;
    }
    total += s.sxy / std::sqrt(s.sxx * s.syy);
  }
  result.loss = scalar_var(-total / d.n);
  if (tape.tracks({&pred})) {
    result.loss->requires_grad = true;
    auto y = result.loss;
    tape.push([pred, y, stats, centered, d, per] {
      if (y->grad.empty()) return;
      auto& gx = pred->grad_buffer();
      const double upstream = -y->grad[0] / d.n;
      for (int n = 0; n < d.n; ++n) {
        const Sample& s = (*stats)[n];
        if (s.degenerate) continue;
        const double* cx = centered->data() + n * per;
        const double* ct = centered->data() + d.size() + n * per;
        const double inv = 1.0 / std::sqrt(s.sxx * s.syy);
        const double ratio = s.sxy / s.sxx;
        for (std::size_t i = 0; i < per; ++i)
          gx[n * per + i] += upstream * inv * (ct[i] - ratio * cx[i]);
      }
    });
  }
  return result;
}

}  // namespace cosearch::ad
