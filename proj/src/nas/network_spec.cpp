#include "cosearch/nas/network_spec.hpp"

#include "cosearch/core/errors.hpp"

namespace cosearch::nas {

namespace {

constexpr const char* kOpNames[kNumOps] = {
    "std_conv_k3",   "std_conv_k5",   "inv_res_k3_e1", "inv_res_k3_e3", "inv_res_k3_e5",
    "inv_res_k5_e1", "inv_res_k5_e3", "inv_res_k5_e5", "skip"};

class LayerBuilder {
 public:
  LayerBuilder(int channels, int size) : c_(channels), h_(size) {}

  void conv(const std::string& name, LayerKind kind, int out, int k, bool relu, int block = -1) {
    LayerRecord l;
    l.name = name;
    l.kind = kind;
    l.in_channels = c_;
    l.out_channels = kind == LayerKind::depthwise ? c_ : out;
    l.kernel = k;
    l.padding = (k - 1) / 2;
    l.in_h = l.in_w = l.out_h = l.out_w = h_;
    l.relu = relu;
    l.block = block;
    c_ = l.out_channels;
    layers_.push_back(l);
  }

  void resample(const std::string& name, LayerKind kind, int factor) {
    LayerRecord l;
    l.name = name;
    l.kind = kind;
    l.in_channels = l.out_channels = c_;
    l.kernel = l.stride = factor;
    l.in_h = l.in_w = h_;
    if (kind == LayerKind::maxpool) {
      if (h_ % factor != 0) throw ShapeError("NetworkSpec: grid not divisible by pooling");
      h_ /= factor;
    } else {
      h_ *= factor;
    }
    l.out_h = l.out_w = h_;
    layers_.push_back(l);
  }

  int channels() const { return c_; }
  int size() const { return h_; }
  std::vector<LayerRecord> take() { return std::move(layers_); }

 private:
  int c_, h_;
  std::vector<LayerRecord> layers_;
};

void append_block(LayerBuilder& b, OpKind op, int index, int width) {
  const std::string base = "block" + std::to_string(index) + "_";
  if (op == OpKind::skip) return;
  if (!is_inverted_residual(op)) {
    b.conv(base + "conv", LayerKind::conv, width, op_kernel(op), true, index);
    return;
  }
  b.conv(base + "expand", LayerKind::conv, width * op_expansion(op), 1, true, index);
  b.conv(base + "dw", LayerKind::depthwise, 0, op_kernel(op), true, index);
  b.conv(base + "project", LayerKind::conv, width, 1, false, index);
}

}  // namespace

const char* op_name(OpKind op) { return kOpNames[static_cast<int>(op)]; }

OpKind op_from_name(const std::string& name) {
  for (int i = 0; i < kNumOps; ++i)
    if (name == kOpNames[i]) return static_cast<OpKind>(i);
  throw ParameterError("unknown block op '" + name + "'");
}

int op_kernel(OpKind op) {
  switch (op) {
    case OpKind::std_conv_k3:
    case OpKind::inv_res_k3_e1:
    case OpKind::inv_res_k3_e3:
    case OpKind::inv_res_k3_e5:
      return 3;
    case OpKind::skip:
      return 0;
    default:
      return 5;
  }
}

int op_expansion(OpKind op) {
  switch (op) {
    case OpKind::inv_res_k3_e1:
    case OpKind::inv_res_k5_e1:
      return 1;
    case OpKind::inv_res_k3_e3:
    case OpKind::inv_res_k5_e3:
      return 3;
    case OpKind::inv_res_k3_e5:
    case OpKind::inv_res_k5_e5:
      return 5;
    default:
      return 0;
  }
}

bool is_inverted_residual(OpKind op) { return op_expansion(op) > 0; }

int op_depth(OpKind op) {
  if (op == OpKind::skip) return 0;
  return is_inverted_residual(op) ? 3 : 1;
}

std::uint64_t search_space_size() {
  std::uint64_t n = 1;
  for (int i = 0; i < kSearchableBlocks; ++i) n *= kNumOps;
  return n;
}

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::deconv: return "deconv";
    case LayerKind::depthwise: return "depthwise";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upsample: return "upsample";
  }
  return "?";
}

std::int64_t count_macs(const LayerRecord& l) { return conv_shape(l).macs(); }

ConvShape conv_shape(const LayerRecord& l) {
  ConvShape s;
  s.name = l.name;
  switch (l.kind) {
    case LayerKind::maxpool:
    case LayerKind::upsample:
      s.dims = {0, 0, 0, 0, 0, 0};
      return s;
    case LayerKind::depthwise:
      s.dims = {l.in_channels, 1, l.out_h, l.out_w, l.kernel, l.kernel};
      s.depthwise = true;
      break;
    default:
      s.dims = {l.out_channels, l.in_channels, l.out_h, l.out_w, l.kernel, l.kernel};
  }
  s.stride = l.stride;
  return s;
}

NetworkSpec NetworkSpec::uniform(OpKind op) {
  NetworkSpec s;
  s.blocks.fill(op);
  return s;
}

std::vector<LayerRecord> NetworkSpec::layers() const {
  if (in_channels < 1 || out_channels < 1 || width < 1)
    throw ShapeError("NetworkSpec: channel counts must be positive");
  if (grid < 4 || grid % 4 != 0) throw ShapeError("NetworkSpec: grid must be a multiple of 4");
  LayerBuilder b(in_channels, grid);
  b.conv("stem_conv1", LayerKind::conv, 48, 7, true);
  b.resample("stem_pool1", LayerKind::maxpool, 2);
  b.conv("stem_conv2", LayerKind::conv, width, 5, true);
  b.resample("stem_pool2", LayerKind::maxpool, 2);
  for (int i = 0; i < kSearchableBlocks; ++i) append_block(b, blocks[i], i, width);
  b.conv("dec_deconv1", LayerKind::deconv, 48, 5, true);
  b.resample("dec_up1", LayerKind::upsample, 2);
  b.conv("dec_deconv2", LayerKind::deconv, 96, 7, true);
  b.resample("dec_up2", LayerKind::upsample, 2);
  b.conv("dec_conv1", LayerKind::conv, 24, 3, true);
  b.conv("dec_conv2", LayerKind::conv, 24, 3, true);
  b.conv("dec_conv3", LayerKind::conv, out_channels, 3, false);
  if (b.size() != grid || b.channels() != out_channels)
    throw ShapeError("NetworkSpec: output does not match the target grid");
  return b.take();
}

std::vector<ConvShape> NetworkSpec::conv_shapes() const {
  std::vector<ConvShape> out;
  for (const auto& l : layers())
    if (l.kind != LayerKind::maxpool && l.kind != LayerKind::upsample) out.push_back(conv_shape(l));
  return out;
}

int NetworkSpec::depth() const {
  int d = backbone_depth();
  for (OpKind op : blocks) d += op_depth(op);
  return d;
}

std::int64_t network_macs(const NetworkSpec& spec) {
  std::int64_t total = 0;
  for (const auto& l : spec.layers()) total += count_macs(l);
  return total;
}

std::int64_t backbone_macs(const NetworkSpec& spec) {
  NetworkSpec s = spec;
  s.blocks.fill(OpKind::skip);
  return network_macs(s);
}

std::int64_t block_macs(const NetworkSpec& spec, OpKind op) {
  LayerBuilder b(spec.width, bottleneck_size(spec));
  append_block(b, op, 0, spec.width);
  std::int64_t total = 0;
  for (const auto& l : b.take()) total += count_macs(l);
  return total;
}

int backbone_depth() { return 7; }

int bottleneck_size(const NetworkSpec& spec) { return spec.grid / 4; }

nlohmann::ordered_json to_json(const NetworkSpec& spec) {
  nlohmann::ordered_json j;
  j["in_channels"] = spec.in_channels;
  j["out_channels"] = spec.out_channels;
  j["grid"] = spec.grid;
  j["width"] = spec.width;
  auto& blocks = j["blocks"] = nlohmann::ordered_json::array();
  for (OpKind op : spec.blocks) blocks.push_back(op_name(op));
  j["depth"] = spec.depth();
  j["macs"] = network_macs(spec);
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : spec.layers()) {
    nlohmann::ordered_json r;
    r["name"] = l.name;
    r["kind"] = layer_kind_name(l.kind);
    r["in_channels"] = l.in_channels;
    r["out_channels"] = l.out_channels;
    r["kernel"] = l.kernel;
    r["stride"] = l.stride;
    r["padding"] = l.padding;
    r["in_size"] = {l.in_h, l.in_w};
    r["out_size"] = {l.out_h, l.out_w};
    r["relu"] = l.relu;
    r["macs"] = count_macs(l);
    layers.push_back(r);
  }
  return j;
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec s;
  try {
    s.in_channels = j.value("in_channels", s.in_channels);
    s.out_channels = j.value("out_channels", s.out_channels);
    s.grid = j.value("grid", s.grid);
    s.width = j.value("width", s.width);
    const auto& blocks = j.at("blocks");
    if (blocks.size() != kSearchableBlocks)
      throw ParameterError("NetworkSpec json: expected 14 blocks");
    for (int i = 0; i < kSearchableBlocks; ++i) s.blocks[i] = op_from_name(blocks[i].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("NetworkSpec json: ") + e.what());
  }
  s.layers();  // validates
  return s;
}

}  // namespace cosearch::nas
