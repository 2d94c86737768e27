#include "cosearch/datasynth/generator.hpp"

#include "cosearch/core/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace cosearch::datasynth {

using sigproc::Signal;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stream ids keep model construction, per-beat jitter and noise apart.
constexpr std::uint64_t kModelStream = 0xFFFF'FFFF'0000'0000ull;
constexpr std::uint64_t kSplitStream = 0xFFFF'FFFF'0000'0001ull;

class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  double uniform() { return counter_uniform(seed_, stream_, draw_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_, stream_, draw_ = 0;
};

template <typename M>
double condition_number(const M& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(a)};
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / sv(sv.size() - 1);
}

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t draw) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ draw);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

void PatientModel::validate() const {
  for (const auto& src : sources)
    for (const auto& b : src)
      if (!(b.width > 0)) throw ParameterError("PatientModel: bump widths must be positive");
  if (!(condition_number(a_ecg) < 1e3) || !(condition_number(a_egm) < 1e3))
    throw ParameterError("PatientModel: mixing matrix condition number >= 1e3");
  if (beat_len < 2) throw ParameterError("PatientModel: beat_len must be >= 2");
}

PatientModel default_model(std::uint64_t seed, std::int64_t patient_id) {
  PatientModel m;
  m.seed = seed;
  m.patient_id = patient_id;
  CounterStream rng(seed, kModelStream);

  // Shared timing template: P, Q, R, S, T.
  struct Wave {
    double center, width, amp_lo, amp_hi;
  };
  const double mid = m.beat_len / 2.0;
  const Wave waves[] = {{mid - 85, 12, 0.05, 0.25},
                        {mid - 12, 4, -0.3, 0.0},
                        {mid, 5, 0.4, 1.0},
                        {mid + 12, 5, -0.4, 0.0},
                        {mid + 105, 22, 0.1, 0.4}};
  for (auto& src : m.sources)
    for (const auto& w : waves) {
      const double sign = rng.uniform() < 0.2 ? -1.0 : 1.0;
      src.push_back({w.center + rng.uniform(-4, 4), w.width * rng.uniform(0.8, 1.25),
                     sign * rng.uniform(w.amp_lo, w.amp_hi)});
    }

  for (int attempt = 0;; ++attempt) {
    for (int i = 0; i < m.a_ecg.size(); ++i) m.a_ecg.data()[i] = rng.normal();
    for (int i = 0; i < m.a_egm.size(); ++i) m.a_egm.data()[i] = rng.normal();
    if (condition_number(m.a_ecg) < 1e2 && condition_number(m.a_egm) < 1e2) break;
    if (attempt > 1000) throw ParameterError("default_model: could not draw mixing matrices");
  }
  m.validate();
  return m;
}

Signal latent_sources(const PatientModel& model, std::int64_t beat_index) {
  CounterStream rng(model.seed, static_cast<std::uint64_t>(beat_index) * 2);
  Signal s = Signal::Zero(kLatentChannels, model.beat_len);
  for (int j = 0; j < kLatentChannels; ++j)
    for (const Bump& b : model.sources[j]) {
      const double c = b.center + rng.uniform(-model.center_jitter, model.center_jitter);
      const double a =
          b.amplitude * (1.0 + rng.uniform(-model.amplitude_jitter, model.amplitude_jitter));
      for (int t = 0; t < model.beat_len; ++t) {
        const double z = (t - c) / b.width;
        s(j, t) += a * std::exp(-0.5 * z * z);
      }
    }
  return s;
}

sigproc::BeatRecord gen_beat(const PatientModel& model, std::int64_t beat_index) {
  const Signal s = latent_sources(model, beat_index);
  sigproc::BeatRecord b;
  b.beat_id = beat_index;
  b.patient_id = model.patient_id;
  b.ecg = model.a_ecg * s;
  b.egm = (model.gain * (model.a_egm * s)).array().tanh().matrix();
  if (model.noise_sd > 0) {
    CounterStream noise(model.seed, static_cast<std::uint64_t>(beat_index) * 2 + 1);
    for (Eigen::Index i = 0; i < b.egm.size(); ++i) b.egm.data()[i] += model.noise_sd * noise.normal();
  }
  sigproc::normalize_rows(b.egm);
  sigproc::normalize_rows(b.ecg);
  return b;
}

sigproc::Dataset gen_dataset(const PatientModel& model, int n_beats) {
  if (n_beats < 2) throw ParameterError("gen_dataset: need at least 2 beats");
  model.validate();
  sigproc::Dataset ds;
  ds.beats.reserve(n_beats);
  for (int i = 0; i < n_beats; ++i) ds.beats.push_back(gen_beat(model, i));
  sigproc::split_halves(ds, static_cast<std::uint64_t>(counter_uniform(model.seed, kSplitStream, 0) * 0x1.0p53));
  return ds;
}

bool weak_egm_channel(const PatientModel& model, int channel) {
  if (channel < 0 || channel >= sigproc::kEgmChannels)
    throw ParameterError("weak_egm_channel: channel out of range");
  return model.a_egm.row(channel).norm() < 0.1;
}

nlohmann::json to_json(const PatientModel& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["patient_id"] = m.patient_id;
  j["beat_len"] = m.beat_len;
  j["gain"] = m.gain;
  j["noise_sd"] = m.noise_sd;
  j["center_jitter"] = m.center_jitter;
  j["amplitude_jitter"] = m.amplitude_jitter;
  auto& src = j["sources"] = nlohmann::ordered_json::array();
  for (const auto& s : m.sources) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& b : s) arr.push_back({{"center", b.center}, {"width", b.width}, {"amplitude", b.amplitude}});
    src.push_back(arr);
  }
  auto rows = [](const auto& a) {
    std::vector<std::vector<double>> r(a.rows(), std::vector<double>(a.cols()));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index k = 0; k < a.cols(); ++k) r[i][k] = a(i, k);
    return r;
  };
  j["a_ecg"] = rows(m.a_ecg);
  j["a_egm"] = rows(m.a_egm);
  return j;
}

PatientModel model_from_json(const nlohmann::json& j) {
  PatientModel m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.patient_id = j.at("patient_id").get<std::int64_t>();
  m.beat_len = j.at("beat_len").get<int>();
  m.gain = j.at("gain").get<double>();
  m.noise_sd = j.at("noise_sd").get<double>();
  m.center_jitter = j.at("center_jitter").get<double>();
  m.amplitude_jitter = j.at("amplitude_jitter").get<double>();
  const auto& src = j.at("sources");
  if (src.size() != kLatentChannels) throw ParameterError("PatientModel json: need 3 sources");
  for (int s = 0; s < kLatentChannels; ++s)
    for (const auto& b : src[s])
      m.sources[s].push_back({b.at("center").get<double>(), b.at("width").get<double>(),
                              b.at("amplitude").get<double>()});
  auto fill = [](auto& a, const nlohmann::json& rows) {
    if (rows.size() != static_cast<std::size_t>(a.rows()))
      throw ParameterError("PatientModel json: mixing matrix row count");
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index k = 0; k < a.cols(); ++k) a(i, k) = rows.at(i).at(k).get<double>();
  };
  fill(m.a_ecg, j.at("a_ecg"));
  fill(m.a_egm, j.at("a_egm"));
  m.validate();
  return m;
}

}  // namespace cosearch::datasynth
