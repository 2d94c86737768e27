#include <doctest.h>

#include "cosearch/core/errors.hpp"
#include "cosearch/sigproc/beat_io.hpp"
#include "cosearch/sigproc/beats.hpp"
#include "cosearch/sigproc/filter.hpp"
#include "cosearch/sigproc/pearson.hpp"
#include "cosearch/sigproc/stft.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace cosearch;
using namespace cosearch::sigproc;

namespace {

constexpr double kPi = std::numbers::pi;

// Magnitude of the analog Butterworth bandpass at the pre-warped frequency.
// The bilinear map sends this exactly onto the digital response, so it is an
// independent check of the pole/zero/gain construction.
double analog_bandpass_gain(int order, double lo, double hi, double fs, double f) {
  const double warp = [&](double x) { return 2 * fs * std::tan(kPi * x / fs); }(f);
  const double w_lo = 2 * fs * std::tan(kPi * lo / fs);
  const double w_hi = 2 * fs * std::tan(kPi * hi / fs);
  const double q = (warp * warp - w_lo * w_hi) / (warp * (w_hi - w_lo));
  return 1.0 / std::sqrt(1.0 + std::pow(q, 2 * order));
}

std::vector<double> sinusoid(double f, double fs, int n, double phase = 0.0) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = std::sin(2 * kPi * f * i / fs + phase);
  return x;
}

int xcorr_peak_lag(const std::vector<double>& a, const std::vector<double>& b, int max_lag) {
  int best = 0;
  double best_v = -1e300;
  const int n = static_cast<int>(a.size());
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      const int j = i + lag;
      if (j >= 0 && j < n) acc += a[i] * b[j];
    }
    if (acc > best_v) {
      best_v = acc;
      best = lag;
    }
  }
  return best;
}

Signal random_signal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Signal s(rows, cols);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = nd(rng);
  return s;
}

}  // namespace

TEST_CASE("design_bandpass: 5th order 3-50 Hz at 1 kHz") {
  const IirCascade f = design_bandpass(5, 3, 50, 1000);
  CHECK(f.sections.size() == 5);
  CHECK(std::abs(f.response(0.0)) < 1e-3);
  const double mid = std::abs(f.response(std::sqrt(3.0 * 50.0)));
  CHECK(mid >= 0.9);
  CHECK(mid <= 1.0 + 1e-12);
  CHECK(std::abs(f.response(500.0)) < 1e-3);
  CHECK(f.max_pole_radius() < 1.0 - 1e-9);
}

TEST_CASE("design_bandpass matches the analog prototype through the bilinear map") {
  for (int order : {1, 2, 3, 5, 6}) {
    const IirCascade f = design_bandpass(order, 3, 50, 1000);
    for (double hz : {1.0, 3.0, 7.5, 12.25, 30.0, 50.0, 120.0, 400.0}) {
      CAPTURE(order);
      CAPTURE(hz);
      CHECK(std::abs(f.response(hz)) ==
            doctest::Approx(analog_bandpass_gain(order, 3, 50, 1000, hz)).epsilon(1e-8));
    }
  }
}

TEST_CASE("design_bandpass rejects invalid band edges") {
  CHECK_THROWS_AS(design_bandpass(5, 0, 50, 1000), ParameterError);
  CHECK_THROWS_AS(design_bandpass(5, 60, 50, 1000), ParameterError);
  CHECK_THROWS_AS(design_bandpass(5, 3, 500, 1000), ParameterError);
  CHECK_THROWS_AS(design_bandpass(0, 3, 50, 1000), ParameterError);
}

TEST_CASE("filtfilt basics") {
  const IirCascade f = design_bandpass(5, 3, 50, 1000);
  SUBCASE("zeros in, zeros out") {
    const auto y = filtfilt(f, std::vector<double>(200, 0.0));
    CHECK(std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; }));
  }
  SUBCASE("too short") { CHECK_THROWS_AS(filtfilt(f, std::vector<double>(30, 1.0)), LengthError); }
  SUBCASE("reversal symmetry") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    std::vector<double> x(600);
    for (auto& v : x) v = nd(rng);
    auto fx = filtfilt(f, x);
    auto rx = x;
    std::reverse(rx.begin(), rx.end());
    auto frx = filtfilt(f, rx);
    std::reverse(frx.begin(), frx.end());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(frx[i] == fx[i]);
  }
}

TEST_CASE("filtfilt is zero phase for in-band sinusoids") {
  const IirCascade f = design_bandpass(5, 3, 50, 1000);
  for (double hz : {5.0, 10.0, 20.0, 40.0}) {
    for (double phase : {0.0, 0.7, 2.1}) {
      const auto x = sinusoid(hz, 1000, 2000, phase);
      const auto y = filtfilt(f, x);
      CAPTURE(hz);
      CHECK(y.size() == x.size());
      CHECK(xcorr_peak_lag(x, y, 60) == 0);
    }
  }
}

TEST_CASE("stft shapes and DC") {
  std::mt19937_64 rng(1);
  const TFGrid g5 = stft(random_signal(5, 390, rng));
  CHECK(g5.channels == 5);
  CHECK(g5.bins == 16);
  CHECK(g5.frames == 16);
  CHECK(stft(random_signal(12, 390, rng)).channels == 12);
  CHECK_THROWS_AS(stft(random_signal(5, 391, rng)), ShapeError);

  const double c = 2.5;
  const TFGrid dc = stft(Signal::Constant(1, 390, c));
  for (int t = 0; t < 16; ++t) {
    CHECK(dc.at(0, 0, t).real() == doctest::Approx(30 * c));
    for (int k = 1; k < 16; ++k) CHECK(std::abs(dc.at(0, k, t)) < 1e-9 * c * 30);
  }
}

TEST_CASE("stft config arithmetic") {
  StftConfig cfg;
  CHECK(cfg.hop() == 24);
  CHECK(cfg.n_bins() == 16);
  CHECK(cfg.n_frames(390) == 16);
  CHECK(cfg.signal_len(16) == 390);
  CHECK_THROWS_AS((StftConfig{30, 30}.validate()), ParameterError);
}

TEST_CASE("istft inverts stft") {
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const Signal x = random_signal(5, 390, rng);
    const Signal y = istft(stft(x));
    REQUIRE(y.cols() == 390);
    CHECK((x - y).cwiseAbs().maxCoeff() < 1e-9);
  }
  TFGrid zero{3, 16, 16, std::vector<std::complex<double>>(3 * 16 * 16)};
  CHECK(istft(zero).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("TFGrid plane layout") {
  std::mt19937_64 rng(9);
  const TFGrid g = stft(random_signal(2, 390, rng));
  const auto planes = g.to_planes();
  CHECK(planes.size() == 4 * 256);
  CHECK(planes[256 + 3] == g.at(0, 0, 3).imag());
  CHECK(planes[2 * 256 + 17] == g.at(1, 1, 1).real());
  const TFGrid back = TFGrid::from_planes(planes.data(), 2, 16, 16);
  CHECK(back.data == g.data);
}

TEST_CASE("pearson") {
  const std::vector<double> a{1, 2, 3}, b{1, 2, 4};
  CHECK(pearson(a, b).r == doctest::Approx(0.98198).epsilon(1e-5));
  std::vector<double> x{0.3, -1.2, 2.0, 0.1}, nx;
  for (double v : x) nx.push_back(-v);
  CHECK(pearson(x, x).r == doctest::Approx(1.0));
  CHECK(pearson(x, nx).r == doctest::Approx(-1.0));
  const auto deg = pearson(std::vector<double>{1, 1, 1}, a);
  CHECK(deg.degenerate);
  CHECK(deg.r == 0.0);
  CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), LengthError);
}

TEST_CASE("pearson is invariant to positive affine maps") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(64), y(64), ax(64);
    for (auto& v : x) v = nd(rng);
    for (auto& v : y) v = nd(rng);
    const double scale = std::exp(nd(rng)), shift = 3 * nd(rng);
    for (int i = 0; i < 64; ++i) ax[i] = scale * x[i] + shift;
    CHECK(std::abs(pearson(ax, y).r - pearson(x, y).r) < 1e-12);
  }
}

TEST_CASE("segment_beats") {
  Recording rec;
  std::mt19937_64 rng(5);
  rec.egm = random_signal(5, 2000, rng);
  rec.ecg = random_signal(12, 2000, rng);
  CHECK(segment_beats(rec, std::vector<std::int64_t>{}).beats.empty());

  const auto mid = segment_beats(rec, std::vector<std::int64_t>{1000});
  REQUIRE(mid.beats.size() == 1);
  CHECK(mid.beats[0].egm.rows() == 5);
  CHECK(mid.beats[0].egm.cols() == 390);
  CHECK(mid.beats[0].ecg.rows() == 12);
  CHECK(mid.beats[0].ecg.cols() == 390);
  CHECK_NOTHROW(validate_beat(mid.beats[0]));
  for (Eigen::Index r = 0; r < 12; ++r) {
    CHECK(mid.beats[0].ecg.row(r).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    CHECK(std::abs(mid.beats[0].ecg.row(r).mean()) < 1e-12);
  }

  const auto edge = segment_beats(rec, std::vector<std::int64_t>{10});
  CHECK(edge.beats.empty());
  CHECK(edge.skipped == 1);
}

TEST_CASE("normalize_rows leaves max-abs in {0, 1}") {
  std::mt19937_64 rng(8);
  Signal s = random_signal(6, 50, rng);
  s.row(2).setConstant(4.0);  // becomes all zeros after centering
  normalize_rows(s);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double peak = s.row(r).cwiseAbs().maxCoeff();
    CHECK((peak == 0.0 || std::abs(peak - 1.0) < 1e-15));
  }
}

TEST_CASE("detect_beats") {
  const double fs = 1000;
  auto pulse_train = [&](std::vector<int> centers, int n) {
    std::vector<double> x(n, 0.0);
    for (int c : centers)
      for (int i = 0; i < n; ++i) x[i] += std::exp(-0.5 * std::pow((i - c) / 8.0, 2));
    return x;
  };
  CHECK(detect_beats(std::vector<double>(3000, 0.0), fs).empty());

  const auto one = detect_beats(pulse_train({1234}, 3000), fs);
  REQUIRE(one.size() == 1);
  CHECK(std::abs(one[0] - 1234) <= 5);

  const auto two = detect_beats(pulse_train({800, 1800}, 3000), fs);
  REQUIRE(two.size() == 2);
  CHECK(std::abs(two[0] - 800) <= 5);
  CHECK(std::abs(two[1] - 1800) <= 5);
}

TEST_CASE("split_halves partitions the beats") {
  Dataset ds;
  ds.beats.resize(11);
  split_halves(ds, 42);
  CHECK(ds.train.size() == 5);
  CHECK(ds.test.size() == 6);
  std::vector<std::size_t> all = ds.train;
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

  Dataset again;
  again.beats.resize(11);
  split_halves(again, 42);
  CHECK(again.train == ds.train);
}

TEST_CASE("beat directory round trip") {
  std::mt19937_64 rng(21);
  Dataset ds;
  for (int i = 0; i < 3; ++i) {
    BeatRecord b;
    b.egm = random_signal(5, 390, rng);
    b.ecg = random_signal(12, 390, rng);
    b.beat_id = 10 + i;
    b.patient_id = 4;
    ds.beats.push_back(b);
  }
  ds.train = {0, 2};
  ds.test = {1};
  const auto dir = std::filesystem::temp_directory_path() / "cosearch_beats_test";
  std::filesystem::remove_all(dir);
  write_beat_directory(dir, ds);
  const Dataset back = read_beat_directory(dir);
  REQUIRE(back.beats.size() == 3);
  CHECK(back.train == ds.train);
  CHECK(back.test == ds.test);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.beats[i].beat_id == ds.beats[i].beat_id);
    CHECK(back.beats[i].egm == ds.beats[i].egm);
    CHECK(back.beats[i].ecg == ds.beats[i].ecg);
  }
  std::filesystem::remove_all(dir);
}
