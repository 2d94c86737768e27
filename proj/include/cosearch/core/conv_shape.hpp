#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace cosearch {

// Loop dimensions of one convolution, in the canonical order used by the
// accelerator model: output channels, input channels, output rows, output
// columns, kernel rows, kernel columns.
enum class Dim : int { M = 0, C = 1, E = 2, F = 3, R = 4, S = 5 };
inline constexpr int kNumDims = 6;
inline constexpr std::array<Dim, kNumDims> kAllDims = {Dim::M, Dim::C, Dim::E,
                                                       Dim::F, Dim::R, Dim::S};

inline constexpr const char* dim_name(Dim d) {
  constexpr const char* names[] = {"M", "C", "E", "F", "R", "S"};
  return names[static_cast<int>(d)];
}

// One MAC-bearing layer. Depthwise layers carry C = 1 and read the input
// channel selected by M. Transposed convolutions with stride 1 are costed as
// the equivalent forward convolution.
struct ConvShape {
  std::string name;
  std::array<int, kNumDims> dims{1, 1, 1, 1, 1, 1};
  int stride = 1;
  bool depthwise = false;

  int operator[](Dim d) const { return dims[static_cast<int>(d)]; }
  int& operator[](Dim d) { return dims[static_cast<int>(d)]; }

  std::int64_t macs() const {
    std::int64_t v = 1;
    for (int x : dims) v *= x;
    return v;
  }
};

}  // namespace cosearch
