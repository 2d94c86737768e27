#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cosearch::sigproc {

using Signal = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kEgmChannels = 5;
inline constexpr int kEcgChannels = 12;
inline constexpr int kBeatLength = 390;

struct BeatRecord {
  Signal egm;  // kEgmChannels x T
  Signal ecg;  // kEcgChannels x T
  std::int64_t beat_id = 0;
  std::int64_t patient_id = 0;
};

// Throws ShapeError when the record breaks the channel count, length or
// finiteness invariants.
void validate_beat(const BeatRecord& beat, int beat_len = kBeatLength);

// Continuous simultaneous recording, channels x samples.
struct Recording {
  Signal egm;
  Signal ecg;
  double sample_rate_hz = 1000.0;
  std::int64_t patient_id = 0;
};

struct SegmentResult {
  std::vector<BeatRecord> beats;
  std::size_t skipped = 0;
};

// Cuts [c - T/2, c - T/2 + T) around every center and normalizes each channel
// (mean removed, unit max-abs). Windows that leave the recording are skipped
// and counted.
SegmentResult segment_beats(const Recording& rec, std::span<const std::int64_t> centers,
                            int beat_len = kBeatLength);

// Mean-center each row, then scale it to unit max-abs. All-zero rows stay zero.
void normalize_rows(Signal& s);

// Peak finder on the smoothed squared-derivative envelope with an adaptive
// (local max based) threshold and a 200 ms refractory window. Each detection
// is refined to the largest |x| within half a refractory window.
std::vector<std::int64_t> detect_beats(std::span<const double> ecg_lead, double fs_hz);

struct Dataset {
  std::vector<BeatRecord> beats;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Shuffles indices 0..n-1 with `seed` and puts floor(n/2) in train, the rest
// in test.
void split_halves(Dataset& ds, std::uint64_t seed);

}  // namespace cosearch::sigproc
