#pragma once

#include "cosearch/autodiff/tape.hpp"

#include <random>
#include <span>
#include <vector>

namespace cosearch::ad {

// Convolutions. `b` may be null; otherwise it holds one bias per output
// channel with dims (1, M, 1, 1). Kernels are (M, C, R, S).
//
// O[n][m][e][f] = sum_{c,r,s} W[m][c][r][s] * I[n][c][eU + r - p][fU + s - p] + B[m]
Var conv2d(Tape& tape, const Var& x, const Var& w, const Var& b, int stride, int padding);

// Adjoint of conv2d with respect to its input: x has M channels, the output
// has C channels and spatial size (H - 1) * stride - 2 * padding + R. The
// bias, if any, has dims (1, C, 1, 1).
Var transposed_conv2d(Tape& tape, const Var& x, const Var& w, const Var& b, int stride,
                      int padding);

// Per-channel convolution. w has dims (C, 1, R, S), bias (1, C, 1, 1).
Var depthwise_conv2d(Tape& tape, const Var& x, const Var& w, const Var& b, int stride,
                     int padding);

// Max over k x k windows; gradient goes to the first maximum in row-major order.
Var maxpool2d(Tape& tape, const Var& x, int kernel, int stride);
Var upsample_nearest(Tape& tape, const Var& x, int factor);
// Subgradient 0 at x == 0.
Var relu(Tape& tape, const Var& x);
Var add(Tape& tape, const Var& a, const Var& b);
Var scale(Tape& tape, const Var& x, double factor);
Var sum(Tape& tape, const Var& x);
// sum_i x_i * coeffs_i, as a (1,1,1,1) scalar.
Var dot(Tape& tape, const Var& x, std::span<const double> coeffs);

// sum_k weights[k] * candidates[k]; weights is a K-element tensor.
Var mix(Tape& tape, std::span<const Var> candidates, const Var& weights);

// Softmax over all elements of `logits`, treated as one vector.
Var softmax(Tape& tape, const Var& logits);

// softmax((logits + gumbels) / tau). Differentiable in logits.
Var gumbel_softmax(Tape& tape, const Var& logits, std::span<const double> gumbels, double tau);
// g_i = -log(-log u_i), u_i uniform in (0, 1).
std::vector<double> sample_gumbels(std::mt19937_64& rng, std::size_t k);

struct LossResult {
  Var loss;
  // Some sample in the batch had a constant target (its term is 0).
  bool degenerate = false;
};

// Mean over the batch of -pearson(flatten(pred[n]), flatten(target[n])).
LossResult pearson_loss(Tape& tape, const Var& pred, const Var& target);

}  // namespace cosearch::ad
