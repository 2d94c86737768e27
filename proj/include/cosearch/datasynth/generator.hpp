#pragma once

#include "cosearch/sigproc/beats.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace cosearch::datasynth {

inline constexpr int kLatentChannels = 3;

struct Bump {
  double center = 0;     // samples
  double width = 1;      // samples (Gaussian sigma)
  double amplitude = 0;  // normalized voltage
};

// Synthetic patient: three latent sources built from P/QRS/T-like Gaussian
// bumps, linearly mixed into 12 ECG leads and, through tanh(gain * .), into 5
// EGM channels.
struct PatientModel {
  std::uint64_t seed = 0;
  std::int64_t patient_id = 0;
  int beat_len = sigproc::kBeatLength;
  std::array<std::vector<Bump>, kLatentChannels> sources;
  Eigen::Matrix<double, sigproc::kEcgChannels, kLatentChannels> a_ecg;
  Eigen::Matrix<double, sigproc::kEgmChannels, kLatentChannels> a_egm;
  double gain = 0.8;
  double noise_sd = 0.02;
  double center_jitter = 3.0;       // +- samples, uniform
  double amplitude_jitter = 0.05;   // +- fraction, uniform

  // Throws ParameterError on non-positive widths or mixing matrices with
  // condition number >= 1e3.
  void validate() const;
};

// Seeded default patient. Mixing matrices are redrawn until well conditioned.
PatientModel default_model(std::uint64_t seed, std::int64_t patient_id = 0);

// Counter-based uniform in (0, 1) keyed on (seed, stream, draw). Pure.
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t draw);

// Latent sources (3 x beat_len) of one beat, jitter included.
sigproc::Signal latent_sources(const PatientModel& model, std::int64_t beat_index);

// Normalized beat; depends only on (model, beat_index).
sigproc::BeatRecord gen_beat(const PatientModel& model, std::int64_t beat_index);

// n_beats >= 2 beats with a 50/50 split shuffled by model.seed.
sigproc::Dataset gen_dataset(const PatientModel& model, int n_beats);

// True when EGM row `channel` of the mixing matrix has norm below 0.1, i.e. the
// single-channel problem is poorly posed.
bool weak_egm_channel(const PatientModel& model, int channel);

nlohmann::json to_json(const PatientModel& model);
PatientModel model_from_json(const nlohmann::json& j);

}  // namespace cosearch::datasynth
