#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "csipred/channel/dataset.hpp"

using namespace csipred;
using chan::ComplexFrame;
using chan::ScenarioConfig;

namespace {

ScenarioConfig tiny_scenario() {
  ScenarioConfig cfg;
  cfg.antennas_v = 2;
  cfg.antennas_h = 2;
  cfg.n_slot = 10;
  cfg.paths = 5;
  return cfg;
}

double lag1_autocorr(const ComplexFrame& f) {
  std::complex<double> num(0, 0);
  double den = 0;
  for (int64_t t = 0; t + 1 < f.n_slot; ++t)
    for (int64_t a = 0; a < f.m; ++a) {
      const std::complex<double> x = f.at(t, a);
      const std::complex<double> y = f.at(t + 1, a);
      num += x * std::conj(y);
      den += std::norm(x);
    }
  return std::abs(num) / den;
}

}  // namespace

TEST_CASE("rayleigh velocity draw matches the closed-form moments") {
  Rng rng(123);
  const double gamma = 8.0;
  const int n = 100000;
  std::vector<double> v(n);
  double mean = 0;
  for (auto& x : v) {
    x = chan::sample_velocity(gamma, rng);
    CHECK(x >= 0.0);
    mean += x / n;
  }
  CHECK(mean == doctest::Approx(gamma * std::sqrt(std::numbers::pi / 2.0)).epsilon(0.01));
  std::sort(v.begin(), v.end());
  const double median = v[n / 2];
  CHECK(median == doctest::Approx(gamma * std::sqrt(2.0 * std::log(2.0))).epsilon(0.02));
  CHECK(median == doctest::Approx(9.4186).epsilon(0.02));
  // CDF boundary: tiny u maps to tiny v; the sample minimum should be near 0
  CHECK(v.front() < 0.2);
  CHECK_THROWS_AS(chan::sample_velocity(0.0, rng), ContractError);
}

TEST_CASE("zero velocity produces a static channel") {
  Rng rng(7);
  auto f = chan::generate_frame(tiny_scenario(), 0.0, rng);
  for (int64_t t = 1; t < f.n_slot; ++t)
    for (int64_t a = 0; a < f.m; ++a) CHECK(f.at(t, a) == f.at(0, a));
}

TEST_CASE("single path gives equal magnitude across antennas") {
  ScenarioConfig cfg = tiny_scenario();
  cfg.paths = 1;
  Rng rng(11);
  auto f = chan::generate_frame(cfg, 5.0, rng);
  for (int64_t t = 0; t < f.n_slot; ++t) {
    const double ref = std::abs(std::complex<double>(f.at(t, 0)));
    for (int64_t a = 1; a < f.m; ++a)
      CHECK(std::abs(std::complex<double>(f.at(t, a))) == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("frame generation is bit-exact for a fixed seed") {
  ScenarioConfig cfg = tiny_scenario();
  auto make = [&]() {
    Rng rng(99);
    Rng frame_rng = rng.derive(3);
    const double v = chan::sample_velocity(cfg.rayleigh_scale, frame_rng);
    return chan::normalize_pathgain(chan::generate_frame(cfg, v, frame_rng));
  };
  auto a = make();
  auto b = make();
  CHECK(a.snapshots == b.snapshots);
  CHECK(a.velocity_mps == b.velocity_mps);
}

TEST_CASE("lag-1 temporal correlation decreases with velocity") {
  ScenarioConfig cfg = tiny_scenario();
  const double kmh = 1.0 / 3.6;
  double corr[3] = {0, 0, 0};
  const double speeds[3] = {3 * kmh, 30 * kmh, 120 * kmh};
  const int frames = 1000;
  for (int b = 0; b < 3; ++b) {
    Rng rng(1000 + b);
    for (int i = 0; i < frames; ++i) {
      Rng fr = rng.derive(static_cast<uint64_t>(i));
      corr[b] += lag1_autocorr(chan::generate_frame(cfg, speeds[b], fr)) / frames;
    }
  }
  CHECK(corr[0] > corr[1]);
  CHECK(corr[1] > corr[2]);
  CHECK(corr[0] > 0.99);
}

TEST_CASE("path-gain normalization") {
  ScenarioConfig cfg = tiny_scenario();
  Rng rng(13);
  auto f = chan::generate_frame(cfg, 3.0, rng);

  auto n1 = chan::normalize_pathgain(f);
  double mean_norm2 = 0;
  for (int64_t t = 0; t < n1.n_slot; ++t) {
    double s = 0;
    for (int64_t a = 0; a < n1.m; ++a) s += std::norm(std::complex<double>(n1.at(t, a)));
    mean_norm2 += s / n1.n_slot;
  }
  CHECK(mean_norm2 / n1.m == doctest::Approx(1.0).epsilon(1e-6));

  // idempotence: normalizing a normalized frame is a unit scale
  auto n2 = chan::normalize_pathgain(n1);
  CHECK(n2.pathgain_norm == doctest::Approx(1.0).epsilon(1e-6));

  // homogeneity: scaling the input does not change the output
  ComplexFrame scaled = f;
  for (auto& v : scaled.snapshots) v *= 10.0f;
  auto n3 = chan::normalize_pathgain(scaled);
  for (size_t i = 0; i < n1.snapshots.size(); ++i) {
    CHECK(n3.snapshots[i].real() == doctest::Approx(n1.snapshots[i].real()).epsilon(1e-5));
    CHECK(n3.snapshots[i].imag() == doctest::Approx(n1.snapshots[i].imag()).epsilon(1e-5));
  }

  ComplexFrame zero;
  zero.n_slot = 2;
  zero.m = 2;
  zero.snapshots.assign(4, {0.0f, 0.0f});
  CHECK_THROWS_AS(chan::normalize_pathgain(zero), ContractError);
}

TEST_CASE("snr_to_sigma inverts the average-SNR formula") {
  auto ds = chan::generate_dataset(tiny_scenario(), 50, 5);
  CHECK(chan::snr_to_sigma(ds.frames, 0.0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(chan::snr_to_sigma(ds.frames, 20.0) == doctest::Approx(0.01).epsilon(1e-5));
  CHECK(chan::snr_to_sigma(ds.frames, 300.0) < 1e-25);
}

TEST_CASE("noise injection is calibrated and independent across slots") {
  ScenarioConfig cfg = tiny_scenario();
  Rng rng(17);
  auto f = chan::normalize_pathgain(chan::generate_frame(cfg, 4.0, rng));

  auto same = chan::add_noise(f, 0.0, rng);
  CHECK(same.snapshots == f.snapshots);

  const double sigma2 = 0.25;
  double power = 0;
  int64_t count = 0;
  std::complex<double> cross(0, 0);
  const int trials = 3000;
  for (int i = 0; i < trials; ++i) {
    Rng nr = rng.derive(static_cast<uint64_t>(i));
    auto noisy = chan::add_noise(f, sigma2, nr);
    for (int64_t t = 0; t < f.n_slot; ++t)
      for (int64_t a = 0; a < f.m; ++a) {
        const std::complex<double> n =
            std::complex<double>(noisy.at(t, a)) - std::complex<double>(f.at(t, a));
        power += std::norm(n);
        ++count;
        if (t + 1 < f.n_slot) {
          const std::complex<double> n2 =
              std::complex<double>(noisy.at(t + 1, a)) - std::complex<double>(f.at(t + 1, a));
          cross += n * std::conj(n2);
        }
      }
  }
  const double est = power / count;
  const double se = sigma2 * std::sqrt(2.0 / count);
  CHECK(std::abs(est - sigma2) < 3 * se + 1e-6);
  CHECK(std::abs(cross) / count < 3 * se + 1e-6);
}

TEST_CASE("empirical SNR after calibration recovers the target within 0.1 dB") {
  ScenarioConfig cfg = tiny_scenario();
  auto ds = chan::generate_dataset(cfg, 1000, 21);
  for (double snr_db : {0.0, 10.0}) {
    const double sigma2 = chan::snr_to_sigma(ds.frames, snr_db);
    Rng rng(1234);
    double signal = 0, noise = 0;
    int64_t slots = 0, cells = 0;
    for (size_t i = 0; i < ds.frames.size(); ++i) {
      Rng nr = rng.derive(i);
      auto noisy = chan::add_noise(ds.frames[i], sigma2, nr);
      for (int64_t t = 0; t < noisy.n_slot; ++t)
        for (int64_t a = 0; a < noisy.m; ++a) {
          signal += std::norm(std::complex<double>(ds.frames[i].at(t, a)));
          noise += std::norm(std::complex<double>(noisy.at(t, a)) -
                             std::complex<double>(ds.frames[i].at(t, a)));
          ++cells;
        }
      slots += noisy.n_slot;
    }
    const double mean_signal = signal / slots;
    const double sigma_hat = noise / cells;
    const double est_db = 10.0 * std::log10(mean_signal / (ds.frames[0].m * sigma_hat));
    CHECK(std::abs(est_db - snr_db) < 0.1);
  }
}

TEST_CASE("to_real is the concat(Re, Im) isometry with exact round-trip") {
  ComplexFrame f;
  f.n_slot = 1;
  f.m = 1;
  f.snapshots = {{1.0f, 2.0f}};
  auto r = chan::to_real(f);
  CHECK(r.dim == 2);
  CHECK(r.data == std::vector<float>{1.0f, 2.0f});

  Rng rng(31);
  ScenarioConfig cfg = tiny_scenario();
  auto g = chan::generate_frame(cfg, 6.0, rng);
  auto rg = chan::to_real(g);
  double cn = 0, rn = 0;
  for (const auto& v : g.snapshots) cn += std::norm(std::complex<double>(v));
  for (float v : rg.data) rn += static_cast<double>(v) * v;
  CHECK(rn == doctest::Approx(cn).epsilon(1e-6));
  auto back = chan::to_complex(rg);
  CHECK(back.snapshots == g.snapshots);
}

TEST_CASE("split assignment: ratios, determinism, stratification") {
  {
    auto ds = chan::generate_dataset(tiny_scenario(), 100, 42);
    CHECK(ds.count(chan::Split::train) == 80);
    CHECK(ds.count(chan::Split::validation) == 10);
    CHECK(ds.count(chan::Split::test) == 10);
    CHECK(ds.stratified);
    auto ds2 = chan::generate_dataset(tiny_scenario(), 100, 42);
    CHECK(ds.split == ds2.split);

    // stratification: split-wise velocity means stay close to the global mean
    double global = 0;
    for (const auto& f : ds.frames) global += f.velocity_mps / ds.frames.size();
    for (auto s : {chan::Split::train, chan::Split::validation, chan::Split::test}) {
      double m = 0;
      auto idx = ds.indices(s);
      for (auto i : idx) m += ds.frames[size_t(i)].velocity_mps / idx.size();
      CHECK(std::abs(m - global) < 0.35 * global);
    }
  }
  {
    auto ds = chan::generate_dataset(tiny_scenario(), 10, 7);
    CHECK(ds.count(chan::Split::train) == 8);
    CHECK(ds.count(chan::Split::validation) == 1);
    CHECK(ds.count(chan::Split::test) == 1);
  }
  {
    // fewer frames than bins: falls back to unstratified with a flag
    auto ds = chan::generate_dataset(tiny_scenario(), 6, 7);
    CHECK_FALSE(ds.stratified);
    CHECK(static_cast<int64_t>(ds.frames.size()) ==
          ds.count(chan::Split::train) + ds.count(chan::Split::validation) +
              ds.count(chan::Split::test));
  }
}

TEST_CASE("dataset-average energy is normalized") {
  auto ds = chan::generate_dataset(tiny_scenario(), 200, 3);
  double acc = 0;
  int64_t slots = 0;
  for (const auto& f : ds.frames) {
    for (int64_t t = 0; t < f.n_slot; ++t) {
      double s = 0;
      for (int64_t a = 0; a < f.m; ++a) s += std::norm(std::complex<double>(f.at(t, a)));
      acc += s / f.m;
    }
    slots += f.n_slot;
  }
  CHECK(acc / slots == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("dataset file round-trip is bit-exact with a JSON sidecar") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "csipred_test_ds";
  fs::create_directories(dir);
  const std::string path = (dir / "ds.bin").string();
  fs::remove(path);
  fs::remove(path + ".json");

  auto ds = chan::generate_dataset(tiny_scenario(), 25, 77);
  chan::save_dataset(ds, path);
  CHECK_THROWS_AS(chan::save_dataset(ds, path, /*force=*/false), ContractError);
  chan::save_dataset(ds, path, /*force=*/true);

  auto loaded = chan::load_dataset(path);
  CHECK(loaded.seed == ds.seed);
  CHECK(loaded.split == ds.split);
  CHECK(loaded.frames.size() == ds.frames.size());
  for (size_t i = 0; i < ds.frames.size(); ++i) {
    CHECK(loaded.frames[i].snapshots == ds.frames[i].snapshots);
    CHECK(loaded.frames[i].velocity_mps == ds.frames[i].velocity_mps);
  }
  CHECK(loaded.scenario.carrier_hz == ds.scenario.carrier_hz);

  std::ifstream side(path + ".json");
  REQUIRE(side.good());
  nlohmann::json j;
  side >> j;
  CHECK(j.at("frames").get<int64_t>() == 25);
  CHECK(j.at("split_counts").at("train").get<int64_t>() == ds.count(chan::Split::train));
}
