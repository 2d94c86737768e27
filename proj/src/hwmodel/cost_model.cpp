#include "cosearch/hwmodel/cost_model.hpp"

#include "cosearch/core/errors.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace cosearch::hw {

namespace {

enum Tensor { kW, kI, kO };

bool depends(Tensor t, Dim d, bool depthwise) {
  switch (t) {
    case kW: return d == Dim::M || d == Dim::C || d == Dim::R || d == Dim::S;
    case kI:
      if (d == Dim::M) return depthwise;
      return d != Dim::M;
    case kO: return d == Dim::M || d == Dim::E || d == Dim::F;
  }
  return false;
}

// Times a tensor tile is (re)fetched under `order`: the product of trip counts
// from the outermost loop down to the innermost loop with trips > 1 that the
// tensor depends on. Inner loops it does not depend on reuse the held tile.
double revisits(Tensor t, const DimOrder& order, const std::array<std::int64_t, kNumDims>& trips,
                bool depthwise) {
  int last = -1;
  for (int i = 0; i < kNumDims; ++i) {
    const Dim d = order[i];
    if (trips[static_cast<int>(d)] > 1 && depends(t, d, depthwise)) last = i;
  }
  double r = 1;
  for (int i = 0; i <= last; ++i) r *= static_cast<double>(trips[static_cast<int>(order[i])]);
  return r;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

Footprint tile_footprint(const ConvShape& shape, const std::array<int, kNumDims>& t) {
  auto at = [&](Dim d) { return static_cast<std::int64_t>(t[static_cast<int>(d)]); };
  Footprint f;
  const std::int64_t in_rows = (at(Dim::E) - 1) * shape.stride + at(Dim::R);
  const std::int64_t in_cols = (at(Dim::F) - 1) * shape.stride + at(Dim::S);
  const std::int64_t in_ch = shape.depthwise ? at(Dim::M) : at(Dim::C);
  f.w = at(Dim::M) * at(Dim::C) * at(Dim::R) * at(Dim::S);
  f.i = in_ch * in_rows * in_cols;
  f.o = at(Dim::M) * at(Dim::E) * at(Dim::F);
  return f;
}

LayerCost estimate_layer(const ConvShape& shape, const Mapping& m, Noc noc, int max_pes,
                         const Platform& platform) {
  LayerCost c;
  c.name = shape.name;
  c.macs = shape.macs();
  c.pes = m.pes();

  std::array<std::int64_t, kNumDims> dram_trips{}, gb_trips{};
  for (Dim d : kAllDims) {
    const int i = static_cast<int>(d);
    const int dim = shape.dims[i], gb = m.tile_gb[i], pe = m.tile_pe[i];
    if (pe < 1 || gb < 1 || gb % pe != 0 || dim % gb != 0) {
      c.violations.push_back(std::string("tiling of ") + dim_name(d) + " violates pe | gb | dim");
    }
    if (pe > 1 && !is_spatial(noc, d))
      c.violations.push_back(std::string(dim_name(d)) + " is not spatial under " + noc_name(noc));
    dram_trips[i] = ceil_div(dim, std::max(gb, 1));
    gb_trips[i] = ceil_div(std::max(gb, 1), std::max(pe, 1));
  }
  if (!is_permutation(m.loop_order_dram) || !is_permutation(m.loop_order_gb))
    c.violations.push_back("loop order is not a permutation of the 6 dims");
  if (c.pes > max_pes) c.violations.push_back("uses " + std::to_string(c.pes) + " PEs > max_pes " +
                                               std::to_string(max_pes));

  const Footprint gbf = tile_footprint(shape, m.tile_gb);
  c.gb_footprint = gbf.w + gbf.i + 2 * gbf.o;
  if (c.gb_footprint > platform.gb_capacity)
    c.violations.push_back("GB tile needs " + std::to_string(c.gb_footprint) + " words > capacity " +
                           std::to_string(platform.gb_capacity));
  c.feasible = c.violations.empty();

  double temporal = 1;
  for (int i = 0; i < kNumDims; ++i) temporal *= static_cast<double>(dram_trips[i] * gb_trips[i]);
  c.compute_cycles = temporal;

  c.dram_words = gbf.w * revisits(kW, m.loop_order_dram, dram_trips, shape.depthwise) +
                 gbf.i * revisits(kI, m.loop_order_dram, dram_trips, shape.depthwise) +
                 gbf.o * revisits(kO, m.loop_order_dram, dram_trips, shape.depthwise);

  const Footprint pef = tile_footprint(shape, m.tile_pe);
  double gb_tiles = 1;
  for (auto t : dram_trips) gb_tiles *= static_cast<double>(t);
  c.gb_words = gb_tiles * (pef.w * revisits(kW, m.loop_order_gb, gb_trips, shape.depthwise) +
                           pef.i * revisits(kI, m.loop_order_gb, gb_trips, shape.depthwise) +
                           pef.o * revisits(kO, m.loop_order_gb, gb_trips, shape.depthwise));

  c.dram_cycles = c.dram_words / platform.dram_bw;
  c.gb_cycles = c.gb_words / platform.gb_bw;
  c.total_cycles = std::max({c.compute_cycles, c.dram_cycles, c.gb_cycles});
  return c;
}

CostReport estimate_network(std::span<const ConvShape> layers, const AcceleratorDesign& design,
                            const Platform& platform) {
  platform.validate();
  if (design.mappings.size() != layers.size() || design.assignment.size() != layers.size())
    throw ShapeError("design covers " + std::to_string(design.mappings.size()) + " layers, network has " +
                     std::to_string(layers.size()));
  CostReport r;
  r.stage_cycles.assign(kSubAccelerators, 0.0);
  r.assignment = design.assignment;
  if (design.max_pes < 1 || design.max_pes > platform.pe_limit)
    r.violations.push_back("max_pes " + std::to_string(design.max_pes) + " outside [1, " +
                           std::to_string(platform.pe_limit) + "]");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const int stage = design.assignment[i];
    if (stage < 0 || stage >= kSubAccelerators)
      throw ShapeError("layer " + std::to_string(i) + " assigned to sub-accelerator " +
                       std::to_string(stage));
    auto c = estimate_layer(layers[i], design.mappings[i], design.noc, design.max_pes, platform);
    for (const auto& v : c.violations) r.violations.push_back(layers[i].name + ": " + v);
    r.stage_cycles[stage] += c.total_cycles;
    r.total_cycles += c.total_cycles;
    r.layers.push_back(std::move(c));
  }
  r.feasible = r.violations.empty();
  r.max_stage_cycles = *std::max_element(r.stage_cycles.begin(), r.stage_cycles.end());
  r.fps = r.max_stage_cycles > 0 ? platform.freq_hz / r.max_stage_cycles : 0.0;
  r.startup_latency_s = r.total_cycles / platform.freq_hz;
  return r;
}

void write_cost_csv(const std::filesystem::path& path, const CostReport& report) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << std::setprecision(17);
  f << "layer,stage,macs,pes,compute_cycles,dram_cycles,gb_cycles,total_cycles,feasible,"
       "max_stage_cycles,fps,startup_s\n";
  std::int64_t macs = 0, pes = 0;
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    const auto& l = report.layers[i];
    macs += l.macs;
    pes = std::max(pes, l.pes);
    f << l.name << ',' << report.assignment[i] << ',' << l.macs << ',' << l.pes << ','
      << l.compute_cycles << ',' << l.dram_cycles << ',' << l.gb_cycles << ',' << l.total_cycles
      << ',' << (l.feasible ? 1 : 0) << ",,,\n";
  }
  f << "summary,," << macs << ',' << pes << ",,,," << report.total_cycles << ','
    << (report.feasible ? 1 : 0) << ',' << report.max_stage_cycles << ',' << report.fps << ','
    << report.startup_latency_s << '\n';
}

}  // namespace cosearch::hw
