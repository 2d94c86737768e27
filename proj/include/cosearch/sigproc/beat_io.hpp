#pragma once

#include "cosearch/sigproc/beats.hpp"

#include <filesystem>

namespace cosearch::sigproc {

// On-disk beat directory:
//   index.csv            beat_id,file,split
//   beat_<id>.f64        little-endian doubles, egm rows then ecg rows
//   beat_<id>.json       shape, channel names, sample rate, ids
// `split` is "train", "test" or empty.
void write_beat_directory(const std::filesystem::path& dir, const Dataset& ds,
                          double sample_rate_hz = 1000.0);
Dataset read_beat_directory(const std::filesystem::path& dir);

// Shared little-endian f64 helpers (also used for checkpoints).
void write_f64_le(std::ostream& os, const double* data, std::size_t n);
void read_f64_le(std::istream& is, double* data, std::size_t n);

}  // namespace cosearch::sigproc
