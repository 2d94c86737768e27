#include "cosearch/datasynth/generator.hpp"
#include "cosearch/core/errors.hpp"
#include "cosearch/sigproc/beat_io.hpp"

#include <doctest.h>

#include <cstring>

#include <filesystem>

using namespace cosearch;
using namespace cosearch::datasynth;

TEST_CASE("gen_beat shapes and determinism") {
  const PatientModel m = default_model(7);
  const auto a = gen_beat(m, 12);
  const auto b = gen_beat(m, 12);
  CHECK(a.egm.rows() == 5);
  CHECK(a.egm.cols() == 390);
  CHECK(a.ecg.rows() == 12);
  CHECK(a.ecg.cols() == 390);
  CHECK(std::memcmp(a.egm.data(), b.egm.data(), sizeof(double) * a.egm.size()) == 0);
  CHECK(std::memcmp(a.ecg.data(), b.ecg.data(), sizeof(double) * a.ecg.size()) == 0);
  CHECK_NOTHROW(sigproc::validate_beat(a));
  // different beats differ
  CHECK((gen_beat(m, 13).ecg - a.ecg).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("default model is well conditioned and seed dependent") {
  const auto m1 = default_model(1), m2 = default_model(2);
  CHECK_NOTHROW(m1.validate());
  CHECK((m1.a_egm - m2.a_egm).norm() > 0.1);
  PatientModel bad = m1;
  bad.a_egm.col(2) = bad.a_egm.col(1);
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = m1;
  bad.sources[0][0].width = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("counter rng is pure and in (0,1)") {
  CHECK(counter_uniform(3, 4, 5) == counter_uniform(3, 4, 5));
  CHECK(counter_uniform(3, 4, 5) != counter_uniform(3, 4, 6));
  double mean = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = counter_uniform(11, 0, i);
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    mean += u;
  }
  CHECK(mean / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("small gain is the linear regime") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    PatientModel m = default_model(seed);
    m.noise_sd = 0;
    m.gain = 0.1;
    for (int beat : {0, 5, 17}) {
      const auto rec = gen_beat(m, beat);
      sigproc::Signal lin = m.a_egm * latent_sources(m, beat);
      sigproc::normalize_rows(lin);
      for (int c = 0; c < 5; ++c) {
        const double dev = (rec.egm.row(c) - lin.row(c)).cwiseAbs().maxCoeff();
        CHECK(dev / lin.row(c).cwiseAbs().maxCoeff() < 0.01);
      }
    }
  }
}

TEST_CASE("ecg is the linear mix of the latent sources") {
  PatientModel m = default_model(9);
  const auto rec = gen_beat(m, 3);
  sigproc::Signal lin = m.a_ecg * latent_sources(m, 3);
  sigproc::normalize_rows(lin);
  CHECK((rec.ecg - lin).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gen_dataset split") {
  const auto m = default_model(4);
  auto ds = gen_dataset(m, 2);
  CHECK(ds.train.size() == 1);
  CHECK(ds.test.size() == 1);
  CHECK_THROWS_AS(gen_dataset(m, 1), ParameterError);

  ds = gen_dataset(m, 401);
  CHECK(ds.beats.size() == 401);
  CHECK(ds.train.size() + ds.test.size() == 401);
  const auto again = gen_dataset(m, 401);
  CHECK(again.train == ds.train);
  for (std::size_t i = 0; i < ds.beats.size(); ++i) REQUIRE(ds.beats[i].ecg == again.beats[i].ecg);
}

TEST_CASE("weak channel warning") {
  PatientModel m = default_model(5);
  CHECK_FALSE(weak_egm_channel(m, 0));
  m.a_egm.row(0) *= 0.05 / m.a_egm.row(0).norm();
  CHECK(weak_egm_channel(m, 0));
}

TEST_CASE("model json round trip regenerates identical beats") {
  const auto m = default_model(21, 3);
  const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back.a_egm == m.a_egm);
  const auto a = gen_beat(m, 8), b = gen_beat(back, 8);
  CHECK(a.egm == b.egm);
  CHECK(a.ecg == b.ecg);
  CHECK(b.patient_id == 3);
}

TEST_CASE("synthetic dataset through the beat directory") {
  const auto dir = std::filesystem::temp_directory_path() / "cosearch_synth_io";
  std::filesystem::remove_all(dir);
  const auto ds = gen_dataset(default_model(2), 6);
  sigproc::write_beat_directory(dir, ds, 1000.0);
  const auto back = sigproc::read_beat_directory(dir);
  REQUIRE(back.beats.size() == 6);
  CHECK(back.beats[4].egm == ds.beats[4].egm);
  CHECK(back.train == ds.train);
  std::filesystem::remove_all(dir);
}
