#pragma once

#include "cosearch/sigproc/beats.hpp"

#include <complex>
#include <vector>

namespace cosearch::sigproc {

struct StftConfig {
  int window_len = 30;
  int overlap = 6;

  int hop() const { return window_len - overlap; }
  int n_bins() const { return window_len / 2 + 1; }
  int n_frames(int signal_len) const { return (signal_len - window_len) / hop() + 1; }
  // Signal length covered exactly by `frames` frames.
  int signal_len(int frames) const { return hop() * (frames - 1) + window_len; }

  // Throws ParameterError when hop <= 0 or window_len < 2.
  void validate() const;
};

// Per-channel spectrogram, stored channel-major: data[(m * K + k) * T_f + t].
struct TFGrid {
  int channels = 0;
  int bins = 0;
  int frames = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int m, int k, int t) { return data[(m * bins + k) * frames + t]; }
  const std::complex<double>& at(int m, int k, int t) const {
    return data[(m * bins + k) * frames + t];
  }

  // Interleaved real planes: plane 2m is Re(channel m), plane 2m+1 is Im.
  // Output length 2 * channels * bins * frames, plane-major.
  std::vector<double> to_planes() const;
  static TFGrid from_planes(const double* planes, int channels, int bins, int frames);
};

// Rectangular-window STFT. `frames` is the expected frame count; the signal
// length must equal cfg.signal_len(frames), otherwise ShapeError.
TFGrid stft(const Signal& x, const StftConfig& cfg = {}, int frames = 16);

// Overlap-add inverse normalized by the summed window envelope.
Signal istft(const TFGrid& grid, const StftConfig& cfg = {});

}  // namespace cosearch::sigproc
