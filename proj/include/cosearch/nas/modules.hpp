#pragma once

#include "cosearch/autodiff/checkpoint.hpp"
#include "cosearch/autodiff/ops.hpp"
#include "cosearch/nas/network_spec.hpp"

#include <random>
#include <vector>

namespace cosearch::nas {

// Weights of one conv/deconv/depthwise layer, or a weightless pool/upsample.
struct LayerParams {
  LayerRecord record;
  ad::Var weight;  // null for pool/upsample
  ad::Var bias;
};

// He-normal weights (unit gain for layers without ReLU), zero bias.
LayerParams init_layer(const LayerRecord& record, std::mt19937_64& rng);
ad::Var apply_layer(ad::Tape& tape, const LayerParams& layer, const ad::Var& x);

// One candidate op of a searchable block. Inverted residuals add their input.
struct BlockOp {
  OpKind op = OpKind::skip;
  std::vector<LayerParams> layers;

  ad::Var forward(ad::Tape& tape, const ad::Var& x) const;
};

BlockOp init_block(OpKind op, int index, const NetworkSpec& spec, std::mt19937_64& rng);

// A concrete network (one op per block) with its weights.
class Network {
 public:
  Network(const NetworkSpec& spec, std::uint64_t seed);
  // Assembles a network from existing parts; shapes must match `spec`.
  Network(const NetworkSpec& spec, std::vector<LayerParams> stem, std::vector<BlockOp> blocks,
          std::vector<LayerParams> decoder);

  // x: (N, in_channels, grid, grid) -> (N, out_channels, grid, grid).
  ad::Var forward(ad::Tape& tape, const ad::Var& x) const;

  const NetworkSpec& spec() const { return spec_; }
  std::vector<ad::Var> parameters() const;
  ad::NamedTensors named_parameters() const;
  // Copies values by name; throws ParameterError on missing/mismatched entries.
  void load(const ad::NamedTensors& params);

 private:
  NetworkSpec spec_;
  std::vector<LayerParams> stem_;
  std::vector<BlockOp> blocks_;
  std::vector<LayerParams> decoder_;
};

// Splits spec.layers() into stem (before the blocks) and decoder (after).
void backbone_layers(const NetworkSpec& spec, std::vector<LayerRecord>& stem,
                     std::vector<LayerRecord>& decoder);
void check_input(const NetworkSpec& spec, const ad::Var& x);

}  // namespace cosearch::nas
