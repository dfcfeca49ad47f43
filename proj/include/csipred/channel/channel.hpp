#pragma once

// Synthetic multi-antenna fading channel generation: a sum-of-sinusoids model
// with a uniform rectangular array, Rayleigh-distributed user speeds, path-
// gain normalization, SNR-calibrated complex noise and realification. All
// randomness is seed-deterministic; each frame derives its own RNG stream
// from (seed, frame index) so generation order never matters.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "csipred/nn/errors.hpp"
#include "csipred/rng.hpp"

namespace csipred::chan {

struct ScenarioConfig {
  int64_t antennas_v = 8;       // vertical URA elements
  int64_t antennas_h = 4;       // horizontal URA elements
  int64_t n_slot = 20;
  double t_slot_s = 0.5e-3;
  double carrier_hz = 2.6e9;
  int64_t paths = 25;
  double rayleigh_scale = 8.0;  // m/s
  double sector_deg = 120.0;
  double range_min_m = 50.0;
  double range_max_m = 150.0;
  double bs_height_m = 25.0;
  double ut_height_m = 1.5;

  int64_t antennas() const { return antennas_v * antennas_h; }

  void validate() const {
    if (antennas_v < 1 || antennas_h < 1 || n_slot < 1 || paths < 1)
      throw ContractError("scenario: counts must be positive");
    if (t_slot_s <= 0 || carrier_hz <= 0 || rayleigh_scale <= 0 || sector_deg <= 0 ||
        range_min_m <= 0 || range_max_m < range_min_m)
      throw ContractError("scenario: geometry values must be positive and consistent");
  }
};

// One user's CSI time series: n_slot snapshots of M complex coefficients.
struct ComplexFrame {
  int64_t n_slot = 0;
  int64_t m = 0;
  std::vector<std::complex<float>> snapshots;  // [n_slot][m]
  float velocity_mps = 0.0f;
  float pathgain_norm = 1.0f;  // scale applied by normalize_pathgain

  std::complex<float> at(int64_t slot, int64_t ant) const {
    return snapshots[static_cast<size_t>(slot * m + ant)];
  }
};

// Realified frame: each snapshot becomes concat(Re, Im) of length 2M.
struct RealSequence {
  int64_t n_slot = 0;
  int64_t dim = 0;  // 2M
  std::vector<float> data;  // [n_slot][dim]

  const float* row(int64_t slot) const { return data.data() + slot * dim; }
};

// Rayleigh-distributed speed draw (density v/g^2 exp(-v^2/2g^2)).
double sample_velocity(double gamma, Rng& rng);

// Sum-of-sinusoids frame for one user at a fixed speed.
ComplexFrame generate_frame(const ScenarioConfig& cfg, double velocity_mps, Rng& rng);

// Scales the frame so the average per-snapshot squared norm equals M.
ComplexFrame normalize_pathgain(const ComplexFrame& frame);

// sigma_n^2 for a target average SNR over the given frames.
double snr_to_sigma(const std::vector<ComplexFrame>& frames, double snr_db);

// h + n with circular complex Gaussian noise, per-element variance sigma2,
// independent across slots and antennas.
ComplexFrame add_noise(const ComplexFrame& frame, double sigma2, Rng& rng);

RealSequence to_real(const ComplexFrame& frame);
ComplexFrame to_complex(const RealSequence& seq);

}  // namespace csipred::chan
