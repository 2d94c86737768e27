#include "cosearch/sigproc/stft.hpp"

#include "cosearch/core/errors.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace cosearch::sigproc {

namespace {

template <typename T>
struct FftwFree {
  void operator()(T* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T, FftwFree<T>>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

// FFTW planning is not thread-safe; execution with fresh fftw_malloc'd arrays
// is. Plans are created once per length under a lock and never destroyed.
struct RealPlans {
  fftw_plan forward;
  fftw_plan inverse;
};

const RealPlans& plans_for(int n) {
  static std::mutex mu;
  static std::map<int, RealPlans> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto in = fftw_buffer<double>(n);
  auto out = fftw_buffer<fftw_complex>(n / 2 + 1);
  RealPlans p;
  p.forward = fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(n, out.get(), in.get(), FFTW_ESTIMATE);
  return cache.emplace(n, p).first->second;
}

}  // namespace

void StftConfig::validate() const {
  if (window_len < 2) throw ParameterError("stft: window_len must be >= 2");
  if (hop() <= 0) throw ParameterError("stft: overlap must be smaller than window_len");
}

std::vector<double> TFGrid::to_planes() const {
  const std::size_t plane = static_cast<std::size_t>(bins) * frames;
  std::vector<double> out(2 * channels * plane);
  for (int m = 0; m < channels; ++m)
    for (std::size_t i = 0; i < plane; ++i) {
      const auto v = data[m * plane + i];
      out[(2 * m) * plane + i] = v.real();
      out[(2 * m + 1) * plane + i] = v.imag();
    }
  return out;
}

TFGrid TFGrid::from_planes(const double* planes, int channels, int bins, int frames) {
  TFGrid g{channels, bins, frames, {}};
  const std::size_t plane = static_cast<std::size_t>(bins) * frames;
  g.data.resize(channels * plane);
  for (int m = 0; m < channels; ++m)
    for (std::size_t i = 0; i < plane; ++i)
      g.data[m * plane + i] = {planes[(2 * m) * plane + i], planes[(2 * m + 1) * plane + i]};
  return g;
}

TFGrid stft(const Signal& x, const StftConfig& cfg, int frames) {
  cfg.validate();
  const int n = cfg.window_len;
  if (x.cols() != cfg.signal_len(frames))
    throw ShapeError("stft: signal length " + std::to_string(x.cols()) + " does not give " +
                     std::to_string(frames) + " frames (need " +
                     std::to_string(cfg.signal_len(frames)) + ")");
  const auto& plans = plans_for(n);
  auto in = fftw_buffer<double>(n);
  auto out = fftw_buffer<fftw_complex>(cfg.n_bins());

  TFGrid g{static_cast<int>(x.rows()), cfg.n_bins(), frames, {}};
  g.data.resize(static_cast<std::size_t>(g.channels) * g.bins * g.frames);
  for (int m = 0; m < g.channels; ++m)
    for (int t = 0; t < frames; ++t) {
      for (int i = 0; i < n; ++i) in.get()[i] = x(m, t * cfg.hop() + i);
      fftw_execute_dft_r2c(plans.forward, in.get(), out.get());
      for (int k = 0; k < g.bins; ++k) g.at(m, k, t) = {out.get()[k][0], out.get()[k][1]};
    }
  return g;
}

Signal istft(const TFGrid& grid, const StftConfig& cfg) {
  cfg.validate();
  const int n = cfg.window_len;
  if (grid.bins != cfg.n_bins())
    throw ShapeError("istft: grid has " + std::to_string(grid.bins) + " bins, config expects " +
                     std::to_string(cfg.n_bins()));
  const auto& plans = plans_for(n);
  auto in = fftw_buffer<fftw_complex>(cfg.n_bins());
  auto out = fftw_buffer<double>(n);

  const int len = cfg.signal_len(grid.frames);
  Signal y = Signal::Zero(grid.channels, len);
  std::vector<double> envelope(len, 0.0);
  for (int t = 0; t < grid.frames; ++t)
    for (int i = 0; i < n; ++i) envelope[t * cfg.hop() + i] += 1.0;

  for (int m = 0; m < grid.channels; ++m)
    for (int t = 0; t < grid.frames; ++t) {
      for (int k = 0; k < grid.bins; ++k) {
        in.get()[k][0] = grid.at(m, k, t).real();
        in.get()[k][1] = grid.at(m, k, t).imag();
      }
      // c2r overwrites its input; the buffer is refilled every frame.
      fftw_execute_dft_c2r(plans.inverse, in.get(), out.get());
      for (int i = 0; i < n; ++i) y(m, t * cfg.hop() + i) += out.get()[i] / n;
    }
  for (int m = 0; m < grid.channels; ++m)
    for (int i = 0; i < len; ++i) y(m, i) /= envelope[i];
  return y;
}

}  // namespace cosearch::sigproc
