#pragma once

#include <span>

namespace cosearch::sigproc {

struct PearsonResult {
  double r = 0.0;
  // Set when x or y has zero variance; r is then 0.
  bool degenerate = false;
};

// Population Pearson correlation. Throws LengthError when sizes differ or are
// below 2.
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

}  // namespace cosearch::sigproc
