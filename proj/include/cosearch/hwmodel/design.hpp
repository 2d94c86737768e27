#pragma once

#include "cosearch/core/conv_shape.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cosearch::hw {

inline constexpr int kSubAccelerators = 10;

enum class Noc : int { output_parallel = 0, kernel_parallel, kernel_output_parallel };
inline constexpr std::array<Noc, 3> kAllNocs = {Noc::output_parallel, Noc::kernel_parallel,
                                                Noc::kernel_output_parallel};

const char* noc_name(Noc noc);
Noc noc_from_name(const std::string& name);  // throws ParameterError

// Dims that may be unrolled across PEs: OUTPUT_PARALLEL {M, E, F},
// KERNEL_PARALLEL {M, C}, KERNEL_OUTPUT_PARALLEL {M, R, F}.
std::vector<Dim> spatial_dims(Noc noc);
bool is_spatial(Noc noc, Dim d);

// All (tile_pe, tile_gb) with tile_pe | tile_gb | dim, ordered by tile_gb then tile_pe.
std::vector<std::pair<int, int>> enumerate_tilings(int dim);

using DimOrder = std::array<Dim, kNumDims>;  // outermost first
inline constexpr DimOrder kCanonicalOrder = kAllDims;
bool is_permutation(const DimOrder& order);

// Two-level loop nest for one layer: DRAM-level loops step over GB tiles in
// loop_order_dram; inside a GB tile, GB-level loops step over PE tiles in
// loop_order_gb; each PE tile is spread across tile_pe PEs.
struct Mapping {
  DimOrder loop_order_dram = kCanonicalOrder;
  DimOrder loop_order_gb = kCanonicalOrder;
  std::array<int, kNumDims> tile_gb{1, 1, 1, 1, 1, 1};
  std::array<int, kNumDims> tile_pe{1, 1, 1, 1, 1, 1};

  int gb(Dim d) const { return tile_gb[static_cast<int>(d)]; }
  int pe(Dim d) const { return tile_pe[static_cast<int>(d)]; }
  std::int64_t pes() const;
  bool operator==(const Mapping&) const = default;
};

// Whole layer held in the GB, one PE.
Mapping full_tile_mapping(const ConvShape& shape);

struct AcceleratorDesign {
  Noc noc = Noc::output_parallel;
  int max_pes = 1;
  std::vector<Mapping> mappings;  // one per MAC-bearing layer
  std::vector<int> assignment;    // layer -> sub-accelerator in [0, 10)
  bool operator==(const AcceleratorDesign&) const = default;
};

struct Platform {
  double freq_hz = 200e6;
  double dram_bw = 16;             // words/cycle
  double gb_bw = 64;               // words/cycle
  std::int64_t gb_capacity = 512 * 1024;  // words
  std::int64_t rf_capacity = 64;   // words per PE
  int pe_limit = 900;
  int bytes_per_word = 2;

  void validate() const;  // ParameterError unless all positive
};

nlohmann::ordered_json to_json(const Mapping& m);
Mapping mapping_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const AcceleratorDesign& d);
AcceleratorDesign design_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const Platform& p);
Platform platform_from_json(const nlohmann::json& j);  // missing fields keep defaults

}  // namespace cosearch::hw
