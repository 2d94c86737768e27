#include "cosearch/sigproc/beats.hpp"

#include "cosearch/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace cosearch::sigproc {

void validate_beat(const BeatRecord& beat, int beat_len) {
  if (beat.egm.rows() != kEgmChannels || beat.ecg.rows() != kEcgChannels)
    throw ShapeError("beat " + std::to_string(beat.beat_id) + ": expected 5 EGM and 12 ECG rows");
  if (beat.egm.cols() != beat_len || beat.ecg.cols() != beat_len)
    throw ShapeError("beat " + std::to_string(beat.beat_id) + ": expected " +
                     std::to_string(beat_len) + " samples");
  if (!beat.egm.allFinite() || !beat.ecg.allFinite())
    throw ShapeError("beat " + std::to_string(beat.beat_id) + ": non-finite samples");
}

void normalize_rows(Signal& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    row.array() -= row.mean();
    const double peak = row.cwiseAbs().maxCoeff();
    if (peak > 0) row /= peak;
  }
}

SegmentResult segment_beats(const Recording& rec, std::span<const std::int64_t> centers,
                            int beat_len) {
  if (rec.egm.cols() != rec.ecg.cols())
    throw ShapeError("segment_beats: EGM and ECG lengths differ");
  SegmentResult out;
  const std::int64_t n = rec.egm.cols();
  std::int64_t next_id = 0;
  for (const std::int64_t c : centers) {
    const std::int64_t begin = c - beat_len / 2;
    if (begin < 0 || begin + beat_len > n) {
      ++out.skipped;
      continue;
    }
    BeatRecord b;
    b.egm = rec.egm.middleCols(begin, beat_len);
    b.ecg = rec.ecg.middleCols(begin, beat_len);
    normalize_rows(b.egm);
    normalize_rows(b.ecg);
    b.beat_id = next_id++;
    b.patient_id = rec.patient_id;
    out.beats.push_back(std::move(b));
  }
  return out;
}

std::vector<std::int64_t> detect_beats(std::span<const double> x, double fs_hz) {
  const auto n = static_cast<std::int64_t>(x.size());
  std::vector<std::int64_t> peaks;
  if (n < 3) return peaks;

  // Central-difference derivative keeps the envelope symmetric around a pulse.
  std::vector<double> env(n, 0.0);
  for (std::int64_t i = 1; i + 1 < n; ++i) {
    const double d = 0.5 * (x[i + 1] - x[i - 1]);
    env[i] = d * d;
  }
  const std::int64_t half_smooth = std::max<std::int64_t>(1, std::llround(0.04 * fs_hz));
  std::vector<double> prefix(n + 1, 0.0);
  std::partial_sum(env.begin(), env.end(), prefix.begin() + 1);
  std::vector<double> smooth(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t lo = std::max<std::int64_t>(0, i - half_smooth);
    const std::int64_t hi = std::min<std::int64_t>(n, i + half_smooth + 1);
    smooth[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  const double global_peak = *std::max_element(smooth.begin(), smooth.end());
  if (!(global_peak > 0)) return peaks;

  const std::int64_t refractory = std::max<std::int64_t>(1, std::llround(0.2 * fs_hz));
  const std::int64_t context = std::llround(2.0 * fs_hz);
  std::int64_t last = -refractory - 1;
  for (std::int64_t i = 1; i + 1 < n; ++i) {
    if (!(smooth[i] >= smooth[i - 1] && smooth[i] > smooth[i + 1])) continue;
    const std::int64_t lo = std::max<std::int64_t>(0, i - context);
    const std::int64_t hi = std::min<std::int64_t>(n, i + context + 1);
    const double local = *std::max_element(smooth.begin() + lo, smooth.begin() + hi);
    // Ignore the noise floor far below the strongest beat.
    if (smooth[i] < 0.3 * local || smooth[i] < 1e-6 * global_peak) continue;

    const std::int64_t r_lo = std::max<std::int64_t>(0, i - refractory / 2);
    const std::int64_t r_hi = std::min<std::int64_t>(n, i + refractory / 2 + 1);
    std::int64_t best = r_lo;
    for (std::int64_t j = r_lo; j < r_hi; ++j)
      if (std::abs(x[j]) > std::abs(x[best])) best = j;

    if (best - last < refractory) {
      if (!peaks.empty() && std::abs(x[best]) > std::abs(x[peaks.back()])) {
        peaks.back() = best;
        last = best;
      }
      continue;
    }
    peaks.push_back(best);
    last = best;
  }
  return peaks;
}

void split_halves(Dataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> idx(ds.beats.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with raw engine output so the split is library-independent.
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  const std::size_t n_train = idx.size() / 2;
  ds.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.test.begin(), ds.test.end());
}

}  // namespace cosearch::sigproc
