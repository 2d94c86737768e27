#pragma once

#include "cosearch/hwmodel/cost_model.hpp"

#include <algorithm>
#include <random>

namespace cosearch::testing {

inline ConvShape make_shape(int m, int c, int e, int f, int r, int s, bool depthwise = false) {
  ConvShape sh;
  sh.name = "L";
  sh.dims = {m, c, e, f, r, s};
  sh.depthwise = depthwise;
  return sh;
}

// Random structurally valid mapping (PE unrolling only on spatial dims, at
// most max_pes PEs). GB capacity is not enforced.
inline hw::Mapping random_mapping(const ConvShape& shape, hw::Noc noc, int max_pes,
                                  std::mt19937_64& rng) {
  for (;;) {
    hw::Mapping m;
    for (Dim d : kAllDims) {
      auto pairs = hw::enumerate_tilings(shape[d]);
      if (!hw::is_spatial(noc, d))
        pairs.erase(std::remove_if(pairs.begin(), pairs.end(), [](auto p) { return p.first > 1; }),
                    pairs.end());
      const auto p = pairs[rng() % pairs.size()];
      m.tile_pe[static_cast<int>(d)] = p.first;
      m.tile_gb[static_cast<int>(d)] = p.second;
    }
    std::shuffle(m.loop_order_dram.begin(), m.loop_order_dram.end(), rng);
    std::shuffle(m.loop_order_gb.begin(), m.loop_order_gb.end(), rng);
    if (m.pes() <= max_pes) return m;
  }
}

}  // namespace cosearch::testing
