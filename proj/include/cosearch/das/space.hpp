#pragma once

#include "cosearch/hwmodel/cost_model.hpp"

#include <span>
#include <string>
#include <vector>

namespace cosearch::das {

// Caps that restrict the accelerator search space.
struct SpaceConfig {
  std::vector<hw::Noc> nocs{hw::kAllNocs.begin(), hw::kAllNocs.end()};
  std::vector<int> pe_menu;  // empty: powers of two up to pe_limit, plus pe_limit
  // Dims whose (tile_pe, tile_gb) is searched; the rest use pe = 1, gb = dim.
  std::array<bool, kNumDims> tiled_dims{true, true, true, true, true, true};
  int order_slots = 6;         // searched pick slots per loop order; the rest follow canonical order
  int assignment_choices = 10;  // sub-accelerators 0..k-1 offered to every layer

  void validate() const;
};

std::vector<int> default_pe_menu(int pe_limit);

enum class ParamKind { noc, max_pes, tiling, order_dram, order_gb, assignment };

// One categorical design parameter.
struct Param {
  ParamKind kind;
  int layer = -1;  // -1 for global parameters
  int slot = 0;    // dim index for tiling, pick slot for orders
  int size = 0;    // number of options (before masking)
  std::string name;
};

// Ordered list of categorical parameters over a fixed layer list. Options of
// a parameter may be masked by earlier choices: tilings that unroll a dim the
// chosen NoC cannot parallelize, and dims already picked by an earlier slot
// of the same loop order. Every unmasked choice vector decodes to a design
// that satisfies the divisibility and permutation invariants.
class SearchSpace {
 public:
  SearchSpace(std::vector<ConvShape> layers, hw::Platform platform, SpaceConfig cfg = {});

  const std::vector<ConvShape>& layers() const { return layers_; }
  const hw::Platform& platform() const { return platform_; }
  const SpaceConfig& config() const { return cfg_; }
  const std::vector<Param>& params() const { return params_; }
  const std::vector<int>& pe_menu() const { return pe_menu_; }
  // (tile_pe, tile_gb) options of `dim` in `layer`.
  const std::vector<std::pair<int, int>>& tilings(int layer, Dim dim) const;

  // Allowed options of params()[i] given the choices of params 0..i-1.
  std::vector<bool> allowed(std::size_t i, std::span<const int> choices) const;
  hw::AcceleratorDesign decode(std::span<const int> choices) const;

  // Number of valid designs (choice vectors), as a double.
  double cardinality() const;
  // Single-PE, single-stage latency of the whole network: sum of MACs.
  double single_pe_bound() const;

 private:
  std::vector<ConvShape> layers_;
  hw::Platform platform_;
  SpaceConfig cfg_;
  std::vector<int> pe_menu_;
  std::vector<std::array<std::vector<std::pair<int, int>>, kNumDims>> tilings_;
  std::vector<Param> params_;
};

enum class Objective { fps, startup };
const char* objective_name(Objective o);
Objective objective_from_name(const std::string& s);

// Cycles to minimize: max stage (fps) or the sum over layers (startup).
// Infeasible designs cost 10 x single_pe_bound().
struct Evaluation {
  double cost = 0;
  bool feasible = false;
  hw::CostReport report;
};
Evaluation evaluate(const SearchSpace& space, const hw::AcceleratorDesign& d, Objective obj);

}  // namespace cosearch::das
