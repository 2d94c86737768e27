#include "cosearch/hwmodel/design.hpp"

#include "cosearch/core/errors.hpp"

#include <algorithm>

namespace cosearch::hw {

namespace {

constexpr const char* kNocNames[] = {"OUTPUT_PARALLEL", "KERNEL_PARALLEL", "KERNEL_OUTPUT_PARALLEL"};

Dim dim_from_name(const std::string& s) {
  for (Dim d : kAllDims)
    if (s == dim_name(d)) return d;
  throw ParameterError("unknown loop dimension '" + s + "'");
}

template <typename J>
J order_json(const DimOrder& o) {
  J a = J::array();
  for (Dim d : o) a.push_back(dim_name(d));
  return a;
}

DimOrder order_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != kNumDims) throw ParameterError("loop order needs 6 dims");
  DimOrder o;
  for (int i = 0; i < kNumDims; ++i) o[i] = dim_from_name(j[i].get<std::string>());
  if (!is_permutation(o)) throw ParameterError("loop order is not a permutation");
  return o;
}

}  // namespace

const char* noc_name(Noc noc) { return kNocNames[static_cast<int>(noc)]; }

Noc noc_from_name(const std::string& name) {
  for (Noc n : kAllNocs)
    if (name == noc_name(n)) return n;
  throw ParameterError("unknown NoC '" + name + "'");
}

std::vector<Dim> spatial_dims(Noc noc) {
  switch (noc) {
    case Noc::output_parallel: return {Dim::M, Dim::E, Dim::F};
    case Noc::kernel_parallel: return {Dim::M, Dim::C};
    case Noc::kernel_output_parallel: return {Dim::M, Dim::R, Dim::F};
  }
  return {};
}

bool is_spatial(Noc noc, Dim d) {
  const auto s = spatial_dims(noc);
  return std::find(s.begin(), s.end(), d) != s.end();
}

std::vector<std::pair<int, int>> enumerate_tilings(int dim) {
  if (dim < 1) throw ParameterError("enumerate_tilings: dim must be >= 1");
  std::vector<std::pair<int, int>> out;
  for (int gb = 1; gb <= dim; ++gb) {
    if (dim % gb) continue;
    for (int pe = 1; pe <= gb; ++pe)
      if (gb % pe == 0) out.emplace_back(pe, gb);
  }
  return out;
}

bool is_permutation(const DimOrder& order) {
  std::array<bool, kNumDims> seen{};
  for (Dim d : order) {
    const int i = static_cast<int>(d);
    if (i < 0 || i >= kNumDims || seen[i]) return false;
    seen[i] = true;
  }
  return true;
}

std::int64_t Mapping::pes() const {
  std::int64_t p = 1;
  for (int t : tile_pe) p *= t;
  return p;
}

Mapping full_tile_mapping(const ConvShape& shape) {
  Mapping m;
  m.tile_gb = shape.dims;
  return m;
}

void Platform::validate() const {
  if (!(freq_hz > 0) || !(dram_bw > 0) || !(gb_bw > 0) || gb_capacity <= 0 || rf_capacity <= 0 ||
      pe_limit <= 0 || bytes_per_word <= 0)
    throw ParameterError("platform parameters must all be positive");
}

nlohmann::ordered_json to_json(const Mapping& m) {
  using J = nlohmann::ordered_json;
  J j;
  j["loop_order_dram"] = order_json<J>(m.loop_order_dram);
  j["loop_order_gb"] = order_json<J>(m.loop_order_gb);
  j["tile_gb"] = m.tile_gb;
  j["tile_pe"] = m.tile_pe;
  return j;
}

Mapping mapping_from_json(const nlohmann::json& j) {
  Mapping m;
  try {
    m.loop_order_dram = order_from_json(j.at("loop_order_dram"));
    m.loop_order_gb = order_from_json(j.at("loop_order_gb"));
    m.tile_gb = j.at("tile_gb").get<std::array<int, kNumDims>>();
    m.tile_pe = j.at("tile_pe").get<std::array<int, kNumDims>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("mapping json: ") + e.what());
  }
  return m;
}

nlohmann::ordered_json to_json(const AcceleratorDesign& d) {
  nlohmann::ordered_json j;
  j["noc"] = noc_name(d.noc);
  j["max_pes"] = d.max_pes;
  j["assignment"] = d.assignment;
  auto& maps = j["mappings"] = nlohmann::ordered_json::array();
  for (const auto& m : d.mappings) maps.push_back(to_json(m));
  return j;
}

AcceleratorDesign design_from_json(const nlohmann::json& j) {
  AcceleratorDesign d;
  try {
    d.noc = noc_from_name(j.at("noc").get<std::string>());
    d.max_pes = j.at("max_pes").get<int>();
    d.assignment = j.at("assignment").get<std::vector<int>>();
    for (const auto& m : j.at("mappings")) d.mappings.push_back(mapping_from_json(m));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("design json: ") + e.what());
  }
  if (d.assignment.size() != d.mappings.size())
    throw ParameterError("design json: assignment and mappings differ in length");
  return d;
}

nlohmann::ordered_json to_json(const Platform& p) {
  nlohmann::ordered_json j;
  j["freq_hz"] = p.freq_hz;
  j["dram_bw"] = p.dram_bw;
  j["gb_bw"] = p.gb_bw;
  j["gb_capacity"] = p.gb_capacity;
  j["rf_capacity"] = p.rf_capacity;
  j["pe_limit"] = p.pe_limit;
  j["bytes_per_word"] = p.bytes_per_word;
  return j;
}

Platform platform_from_json(const nlohmann::json& j) {
  Platform p;
  try {
    p.freq_hz = j.value("freq_hz", p.freq_hz);
    p.dram_bw = j.value("dram_bw", p.dram_bw);
    p.gb_bw = j.value("gb_bw", p.gb_bw);
    p.gb_capacity = j.value("gb_capacity", p.gb_capacity);
    p.rf_capacity = j.value("rf_capacity", p.rf_capacity);
    p.pe_limit = j.value("pe_limit", p.pe_limit);
    p.bytes_per_word = j.value("bytes_per_word", p.bytes_per_word);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("platform json: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace cosearch::hw
