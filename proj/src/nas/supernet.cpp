#include "cosearch/nas/supernet.hpp"

#include "cosearch/core/errors.hpp"

#include <cmath>

namespace cosearch::nas {

Supernet::Supernet(const NetworkSpec& base, std::uint64_t seed) : base_(base) {
  base_.blocks.fill(OpKind::skip);
  std::mt19937_64 rng(seed);
  std::vector<LayerRecord> stem, decoder;
  backbone_layers(base_, stem, decoder);
  for (const auto& r : stem) stem_.push_back(init_layer(r, rng));
  blocks_.resize(kSearchableBlocks);
  for (int b = 0; b < kSearchableBlocks; ++b)
    for (int k = 0; k < kNumOps; ++k) blocks_[b][k] = init_block(kAllOps[k], b, base_, rng);
  for (const auto& r : decoder) decoder_.push_back(init_layer(r, rng));
  for (int b = 0; b < kSearchableBlocks; ++b)
    alpha_.push_back(ad::parameter(ad::Tensor4({1, 1, 1, kNumOps})));
  for (int k = 0; k < kNumOps; ++k) op_macs_[k] = static_cast<double>(block_macs(base_, kAllOps[k]));
  fixed_macs_ = backbone_macs(base_);
}

ad::Var Supernet::forward(ad::Tape& tape, const ad::Var& x, std::span<const ad::Var> weights) const {
  check_input(base_, x);
  if (weights.size() != kSearchableBlocks) throw ShapeError("Supernet: need 14 weight vectors");
  ad::Var y = x;
  for (const auto& l : stem_) y = apply_layer(tape, l, y);
  std::vector<ad::Var> cands(kNumOps);
  for (int b = 0; b < kSearchableBlocks; ++b) {
    if (weights[b]->value.size() != kNumOps) throw ShapeError("Supernet: weights need 9 entries");
    for (int k = 0; k < kNumOps; ++k) cands[k] = blocks_[b][k].forward(tape, y);
    y = ad::mix(tape, cands, weights[b]);
  }
  for (const auto& l : decoder_) y = apply_layer(tape, l, y);
  return y;
}

std::vector<ad::Var> Supernet::sample_weights(ad::Tape& tape, std::mt19937_64& rng, double tau) const {
  std::vector<ad::Var> w;
  for (const auto& a : alpha_) {
    const auto g = ad::sample_gumbels(rng, kNumOps);
    w.push_back(ad::gumbel_softmax(tape, a, g, tau));
  }
  return w;
}

AlphaTable Supernet::alpha_values() const {
  AlphaTable t{};
  for (int b = 0; b < kSearchableBlocks; ++b)
    for (int k = 0; k < kNumOps; ++k) t[b][k] = alpha_[b]->value[k];
  return t;
}

void Supernet::set_alpha(const AlphaTable& a) {
  for (int b = 0; b < kSearchableBlocks; ++b)
    for (int k = 0; k < kNumOps; ++k) {
      if (!std::isfinite(a[b][k])) throw ParameterError("alpha must be finite");
      alpha_[b]->value[k] = a[b][k];
    }
}

std::vector<ad::Var> Supernet::weight_parameters() const {
  std::vector<ad::Var> out;
  auto visit = [&](const LayerParams& l) {
    if (!l.weight) return;
    out.push_back(l.weight);
    out.push_back(l.bias);
  };
  for (const auto& l : stem_) visit(l);
  for (const auto& ops : blocks_)
    for (const auto& op : ops)
      for (const auto& l : op.layers) visit(l);
  for (const auto& l : decoder_) visit(l);
  return out;
}

Network Supernet::subnet(const NetworkSpec& spec) const {
  NetworkSpec s = spec;
  if (s.in_channels != base_.in_channels || s.out_channels != base_.out_channels ||
      s.grid != base_.grid || s.width != base_.width)
    throw ShapeError("Supernet::subnet: spec does not match the supernet backbone");
  std::vector<BlockOp> chosen;
  for (int b = 0; b < kSearchableBlocks; ++b) chosen.push_back(blocks_[b][static_cast<int>(s.blocks[b])]);
  return Network(s, stem_, std::move(chosen), decoder_);
}

double expected_macs(const Supernet& net, const AlphaTable& alpha) {
  double total = static_cast<double>(net.fixed_macs());
  for (const auto& row : alpha) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0, acc = 0;
    for (int k = 0; k < kNumOps; ++k) {
      const double e = std::exp(row[k] - mx);
      z += e;
      acc += e * net.op_macs()[k];
    }
    total += acc / z;
  }
  return total;
}

namespace {

ad::Var blocks_plus_backbone(ad::Tape& tape, const Supernet& net, std::span<const ad::Var> probs) {
  AlphaRow g{};
  for (int k = 0; k < kNumOps; ++k) g[k] = net.op_macs()[k] * 1e-9;
  ad::Var total = ad::constant(ad::Tensor4({1, 1, 1, 1}, net.fixed_macs() * 1e-9));
  for (const auto& p : probs) total = ad::add(tape, total, ad::dot(tape, p, g));
  return total;
}

}  // namespace

ad::Var expected_gmacs(ad::Tape& tape, const Supernet& net) {
  std::vector<ad::Var> probs;
  for (const auto& a : net.alpha()) probs.push_back(ad::softmax(tape, a));
  return blocks_plus_backbone(tape, net, probs);
}

ad::Var weighted_gmacs(ad::Tape& tape, const Supernet& net, std::span<const ad::Var> weights) {
  return blocks_plus_backbone(tape, net, weights);
}

NetworkSpec derive_spec(const NetworkSpec& base, const AlphaTable& alpha) {
  NetworkSpec s = base;
  for (int b = 0; b < kSearchableBlocks; ++b) {
    int best = 0;
    for (int k = 1; k < kNumOps; ++k)
      if (alpha[b][k] > alpha[b][best]) best = k;
    s.blocks[b] = kAllOps[best];
  }
  return s;
}

}  // namespace cosearch::nas
