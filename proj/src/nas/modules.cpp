#include "cosearch/nas/modules.hpp"

#include "cosearch/core/errors.hpp"

#include <cmath>
#include <map>

namespace cosearch::nas {

LayerParams init_layer(const LayerRecord& record, std::mt19937_64& rng) {
  LayerParams p{record, nullptr, nullptr};
  const int k = record.kernel;
  ad::Dims4 wd;
  int fan_in = 0;
  switch (record.kind) {
    case LayerKind::maxpool:
    case LayerKind::upsample:
      return p;
    case LayerKind::conv:
      wd = {record.out_channels, record.in_channels, k, k};
      fan_in = record.in_channels * k * k;
      break;
    case LayerKind::deconv:
      wd = {record.in_channels, record.out_channels, k, k};
      fan_in = record.in_channels * k * k;
      break;
    case LayerKind::depthwise:
      wd = {record.in_channels, 1, k, k};
      fan_in = k * k;
      break;
  }
  const double gain = record.relu ? 2.0 : 1.0;
  p.weight = ad::parameter(ad::random_normal(wd, std::sqrt(gain / fan_in), rng));
  p.bias = ad::parameter(ad::Tensor4({1, record.out_channels, 1, 1}));
  return p;
}

ad::Var apply_layer(ad::Tape& tape, const LayerParams& layer, const ad::Var& x) {
  const auto& r = layer.record;
  ad::Var y;
  switch (r.kind) {
    case LayerKind::maxpool:
      return ad::maxpool2d(tape, x, r.kernel, r.stride);
    case LayerKind::upsample:
      return ad::upsample_nearest(tape, x, r.kernel);
    case LayerKind::conv:
      y = ad::conv2d(tape, x, layer.weight, layer.bias, r.stride, r.padding);
      break;
    case LayerKind::deconv:
      y = ad::transposed_conv2d(tape, x, layer.weight, layer.bias, r.stride, r.padding);
      break;
    case LayerKind::depthwise:
      y = ad::depthwise_conv2d(tape, x, layer.weight, layer.bias, r.stride, r.padding);
      break;
  }
  return r.relu ? ad::relu(tape, y) : y;
}

ad::Var BlockOp::forward(ad::Tape& tape, const ad::Var& x) const {
  if (op == OpKind::skip) return x;
  ad::Var y = x;
  for (const auto& l : layers) y = apply_layer(tape, l, y);
  return is_inverted_residual(op) ? ad::add(tape, y, x) : y;
}

BlockOp init_block(OpKind op, int index, const NetworkSpec& spec, std::mt19937_64& rng) {
  NetworkSpec single = NetworkSpec::uniform(OpKind::skip);
  single.in_channels = spec.in_channels;
  single.out_channels = spec.out_channels;
  single.grid = spec.grid;
  single.width = spec.width;
  single.blocks[index] = op;
  BlockOp b{op, {}};
  for (const auto& r : single.layers())
    if (r.block == index) b.layers.push_back(init_layer(r, rng));
  return b;
}

void backbone_layers(const NetworkSpec& spec, std::vector<LayerRecord>& stem,
                     std::vector<LayerRecord>& decoder) {
  stem.clear();
  decoder.clear();
  bool after = false;
  NetworkSpec s = spec;
  s.blocks.fill(OpKind::skip);
  for (const auto& r : s.layers()) {
    if (r.name.rfind("dec_", 0) == 0) after = true;
    (after ? decoder : stem).push_back(r);
  }
}

void check_input(const NetworkSpec& spec, const ad::Var& x) {
  const auto& d = x->value.dims();
  if (d.n < 1 || d.c != spec.in_channels || d.h != spec.grid || d.w != spec.grid)
    throw ShapeError("network input " + d.str() + ", expected (N, " +
                     std::to_string(spec.in_channels) + ", " + std::to_string(spec.grid) + ", " +
                     std::to_string(spec.grid) + ")");
}

Network::Network(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  std::mt19937_64 rng(seed);
  std::vector<LayerRecord> stem, decoder;
  backbone_layers(spec, stem, decoder);
  for (const auto& r : stem) stem_.push_back(init_layer(r, rng));
  for (int i = 0; i < kSearchableBlocks; ++i) blocks_.push_back(init_block(spec.blocks[i], i, spec, rng));
  for (const auto& r : decoder) decoder_.push_back(init_layer(r, rng));
}

Network::Network(const NetworkSpec& spec, std::vector<LayerParams> stem, std::vector<BlockOp> blocks,
                 std::vector<LayerParams> decoder)
    : spec_(spec), stem_(std::move(stem)), blocks_(std::move(blocks)), decoder_(std::move(decoder)) {
  if (blocks_.size() != kSearchableBlocks) throw ShapeError("Network: need 14 blocks");
  for (int i = 0; i < kSearchableBlocks; ++i)
    if (blocks_[i].op != spec_.blocks[i]) throw ShapeError("Network: block op mismatch");
}

ad::Var Network::forward(ad::Tape& tape, const ad::Var& x) const {
  check_input(spec_, x);
  ad::Var y = x;
  for (const auto& l : stem_) y = apply_layer(tape, l, y);
  for (const auto& b : blocks_) y = b.forward(tape, y);
  for (const auto& l : decoder_) y = apply_layer(tape, l, y);
  return y;
}

namespace {

template <typename F>
void for_each_param(const std::vector<LayerParams>& stem, const std::vector<BlockOp>& blocks,
                    const std::vector<LayerParams>& decoder, F&& f) {
  auto visit = [&](const LayerParams& l) {
    if (!l.weight) return;
    f(l.record.name + ".weight", l.weight);
    f(l.record.name + ".bias", l.bias);
  };
  for (const auto& l : stem) visit(l);
  for (const auto& b : blocks)
    for (const auto& l : b.layers) visit(l);
  for (const auto& l : decoder) visit(l);
}

}  // namespace

std::vector<ad::Var> Network::parameters() const {
  std::vector<ad::Var> out;
  for_each_param(stem_, blocks_, decoder_, [&](const std::string&, const ad::Var& v) { out.push_back(v); });
  return out;
}

ad::NamedTensors Network::named_parameters() const {
  ad::NamedTensors out;
  for_each_param(stem_, blocks_, decoder_,
                 [&](const std::string& n, const ad::Var& v) { out.emplace_back(n, v->value); });
  return out;
}

void Network::load(const ad::NamedTensors& params) {
  std::map<std::string, const ad::Tensor4*> by_name;
  for (const auto& [n, t] : params) by_name[n] = &t;
  for_each_param(stem_, blocks_, decoder_, [&](const std::string& n, const ad::Var& v) {
    auto it = by_name.find(n);
    if (it == by_name.end()) throw ParameterError("checkpoint lacks parameter " + n);
    if (!(it->second->dims() == v->value.dims()))
      throw ParameterError("checkpoint parameter " + n + " has dims " + it->second->dims().str());
    v->value = *it->second;
  });
}

}  // namespace cosearch::nas
