#pragma once

#include "cosearch/hwmodel/design.hpp"

#include <filesystem>
#include <span>

namespace cosearch::hw {

struct LayerCost {
  std::string name;
  std::int64_t macs = 0;
  std::int64_t pes = 0;
  double compute_cycles = 0;
  double dram_words = 0;
  double dram_cycles = 0;
  double gb_words = 0;
  double gb_cycles = 0;
  double total_cycles = 0;  // max(compute, dram, gb)
  std::int64_t gb_footprint = 0;  // W + I + 2 O tile words
  bool feasible = true;
  std::vector<std::string> violations;
};

// Words of the W, I, O tiles given per-dim tile sizes.
struct Footprint {
  std::int64_t w = 0, i = 0, o = 0;
};
Footprint tile_footprint(const ConvShape& shape, const std::array<int, kNumDims>& tile);

// Pure. Structural problems (tiles not dividing, non-spatial unrolling,
// too many PEs, GB overflow) are reported as violations, never thrown.
LayerCost estimate_layer(const ConvShape& shape, const Mapping& mapping, Noc noc, int max_pes,
                         const Platform& platform);

struct CostReport {
  std::vector<LayerCost> layers;
  std::vector<double> stage_cycles;  // one per sub-accelerator
  std::vector<int> assignment;
  double max_stage_cycles = 0;
  double total_cycles = 0;
  double fps = 0;
  double startup_latency_s = 0;
  bool feasible = true;
  std::vector<std::string> violations;
};

// Throws ShapeError when the design does not cover the layers.
CostReport estimate_network(std::span<const ConvShape> layers, const AcceleratorDesign& design,
                            const Platform& platform);

// One row per layer plus a summary row.
void write_cost_csv(const std::filesystem::path& path, const CostReport& report);

}  // namespace cosearch::hw
