#pragma once

#include "cosearch/nas/modules.hpp"

#include <array>
#include <span>

namespace cosearch::nas {

using AlphaRow = std::array<double, kNumOps>;
using AlphaTable = std::array<AlphaRow, kSearchableBlocks>;

// Backbone whose searchable blocks hold all 9 candidate ops, plus the
// architecture logits alpha (14 x 9, one (1,1,1,9) parameter per block).
class Supernet {
 public:
  // `base` supplies channel counts, grid and width; its block choices are ignored.
  Supernet(const NetworkSpec& base, std::uint64_t seed);

  // weights: one 9-element tensor per block. Each block outputs the weighted
  // sum of its candidates.
  ad::Var forward(ad::Tape& tape, const ad::Var& x, std::span<const ad::Var> weights) const;
  // Gumbel-softmax weights of every block, drawing 9 gumbels per block from rng.
  std::vector<ad::Var> sample_weights(ad::Tape& tape, std::mt19937_64& rng, double tau) const;

  const NetworkSpec& base() const { return base_; }
  const std::vector<ad::Var>& alpha() const { return alpha_; }
  AlphaTable alpha_values() const;
  void set_alpha(const AlphaTable& a);

  std::vector<ad::Var> weight_parameters() const;
  // Network made of the selected candidates; shares weights with the supernet.
  Network subnet(const NetworkSpec& spec) const;

  const AlphaRow& op_macs() const { return op_macs_; }
  std::int64_t fixed_macs() const { return fixed_macs_; }

 private:
  NetworkSpec base_;
  std::vector<LayerParams> stem_, decoder_;
  std::vector<std::array<BlockOp, kNumOps>> blocks_;
  std::vector<ad::Var> alpha_;
  AlphaRow op_macs_{};
  std::int64_t fixed_macs_ = 0;
};

// sum_blocks sum_ops softmax(alpha_b)[op] * macs(op) + fixed backbone MACs.
double expected_macs(const Supernet& net, const AlphaTable& alpha);
// The same quantity in giga-MACs, differentiable in the supernet's alpha.
ad::Var expected_gmacs(ad::Tape& tape, const Supernet& net);
// GMACs of the blocks weighted by given (e.g. sampled) op weights, plus the backbone.
ad::Var weighted_gmacs(ad::Tape& tape, const Supernet& net, std::span<const ad::Var> weights);

// Per-block argmax, ties to the lowest op index.
NetworkSpec derive_spec(const NetworkSpec& base, const AlphaTable& alpha);

}  // namespace cosearch::nas
