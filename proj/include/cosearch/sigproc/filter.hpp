#pragma once

#include <complex>
#include <span>
#include <vector>

namespace cosearch::sigproc {

// Second-order section, normalized so a0 == 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;

  std::complex<double> response(std::complex<double> z) const;
};

struct IirCascade {
  std::vector<Biquad> sections;
  double sample_rate_hz = 0;

  // Transfer function evaluated on the unit circle at `freq_hz`.
  std::complex<double> response(double freq_hz) const;
  // Largest pole magnitude over all sections.
  double max_pole_radius() const;
};

// Butterworth bandpass of the given prototype order, realized as `order`
// second-order sections through the bilinear transform with pre-warped band
// edges. Throws ParameterError unless 0 < lo < hi < fs/2 and order >= 1.
IirCascade design_bandpass(int order, double lo_hz, double hi_hz, double fs_hz);

// Single forward pass with steady-state initial conditions scaled by x[0].
std::vector<double> sosfilt(const IirCascade& f, std::span<const double> x);

// Zero-phase forward-backward filtering. The input is extended on both ends
// by odd reflection of 6 * sections samples, which are trimmed afterwards.
// Throws LengthError if x is not longer than that padding.
std::vector<double> filtfilt(const IirCascade& f, std::span<const double> x);

}  // namespace cosearch::sigproc
