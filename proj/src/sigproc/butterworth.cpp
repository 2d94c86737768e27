#include "cosearch/sigproc/filter.hpp"

#include "cosearch/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace cosearch::sigproc {

using cplx = std::complex<double>;

cplx Biquad::response(cplx z) const {
  const cplx zi = 1.0 / z;
  const cplx num = b0 + b1 * zi + b2 * zi * zi;
  const cplx den = 1.0 + a1 * zi + a2 * zi * zi;
  return num / den;
}

cplx IirCascade::response(double freq_hz) const {
  const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * freq_hz / sample_rate_hz);
  cplx h = 1.0;
  for (const auto& s : sections) h *= s.response(z);
  return h;
}

double IirCascade::max_pole_radius() const {
  double worst = 0.0;
  for (const auto& s : sections) {
    // Roots of z^2 + a1 z + a2.
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    const cplx p1 = (-s.a1 + disc) / 2.0;
    const cplx p2 = (-s.a1 - disc) / 2.0;
    worst = std::max({worst, std::abs(p1), std::abs(p2)});
  }
  return worst;
}

IirCascade design_bandpass(int order, double lo_hz, double hi_hz, double fs_hz) {
  if (order < 1) throw ParameterError("design_bandpass: order must be >= 1");
  if (!(fs_hz > 0) || !(lo_hz > 0) || !(lo_hz < hi_hz) || !(hi_hz < fs_hz / 2))
    throw ParameterError("design_bandpass: need 0 < lo < hi < fs/2, got lo=" +
                         std::to_string(lo_hz) + " hi=" + std::to_string(hi_hz) +
                         " fs=" + std::to_string(fs_hz));

  const double pi = std::numbers::pi;
  const double fs2 = 2.0 * fs_hz;
  // Pre-warped analog band edges (rad/s).
  const double w_lo = fs2 * std::tan(pi * lo_hz / fs_hz);
  const double w_hi = fs2 * std::tan(pi * hi_hz / fs_hz);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  // Analog lowpass prototype -> bandpass -> bilinear. The bandpass keeps
  // `order` zeros at s = 0 (z = 1) and `order` at infinity (z = -1), so the
  // digital gain is bw^N (2fs)^N / prod(2fs - p_s).
  std::vector<cplx> poles;
  cplx gain = std::pow(bw * fs2, order);
  for (int k = 0; k < order; ++k) {
    const cplx p = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
    const cplx p_lp = p * bw / 2.0;
    const cplx root = std::sqrt(p_lp * p_lp - w0_sq);
    for (const cplx s : {p_lp + root, p_lp - root}) {
      poles.push_back((fs2 + s) / (fs2 - s));
      gain /= fs2 - s;
    }
  }

  // Pair conjugates; leftover real poles are paired by sorted value.
  constexpr double kImagTol = 1e-12;
  std::vector<std::pair<cplx, cplx>> pairs;
  std::vector<double> reals;
  for (const cplx& p : poles) {
    if (std::abs(p.imag()) <= kImagTol * std::max(1.0, std::abs(p)))
      reals.push_back(p.real());
    else if (p.imag() > 0)
      pairs.emplace_back(p, std::conj(p));
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(reals[i], reals[i + 1]);
  if (pairs.size() != static_cast<std::size_t>(order))
    throw ParameterError("design_bandpass: pole pairing failed");

  IirCascade out;
  out.sample_rate_hz = fs_hz;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [p1, p2] = pairs[i];
    Biquad s;
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;  // zeros at z = 1 and z = -1
    s.a1 = -(p1 + p2).real();
    s.a2 = (p1 * p2).real();
    out.sections.push_back(s);
  }
  const double g = gain.real();
  out.sections.front().b0 *= g;
  out.sections.front().b2 *= g;
  return out;
}

namespace {

// Direct form II transposed, state in place.
void run_section(const Biquad& s, std::vector<double>& x, double z1, double z2) {
  for (double& v : x) {
    const double in = v;
    const double y = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * y + z2;
    z2 = s.b2 * in - s.a2 * y;
    v = y;
  }
}

}  // namespace

std::vector<double> sosfilt(const IirCascade& f, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) return y;
  double level = y.front();
  for (const auto& s : f.sections) {
    // Steady-state response of this section to a constant input `level`.
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double z2 = (s.b2 - s.a2 * dc) * level;
    const double z1 = (s.b1 - s.a1 * dc) * level + z2;
    run_section(s, y, z1, z2);
    level *= dc;
  }
  return y;
}

std::vector<double> filtfilt(const IirCascade& f, std::span<const double> x) {
  const std::size_t pad = 6 * f.sections.size();
  const std::size_t n = x.size();
  if (n <= pad)
    throw LengthError("filtfilt: input length " + std::to_string(n) + " must exceed padding " +
                      std::to_string(pad));

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  // Forward-then-backward and backward-then-forward, averaged. Each branch is
  // zero phase on its own; the average also makes the result commute exactly
  // with time reversal, which a single branch only does away from the edges.
  std::vector<double> fb = sosfilt(f, ext);
  std::reverse(fb.begin(), fb.end());
  fb = sosfilt(f, fb);
  std::reverse(fb.begin(), fb.end());

  std::vector<double> bf(ext.rbegin(), ext.rend());
  bf = sosfilt(f, bf);
  std::reverse(bf.begin(), bf.end());
  bf = sosfilt(f, bf);

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 0.5 * (fb[pad + i] + bf[pad + i]);
  return y;
}

}  // namespace cosearch::sigproc
