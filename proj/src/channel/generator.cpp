#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "csipred/channel/channel.hpp"
#include "csipred/channel/dataset.hpp"

namespace csipred::chan {

namespace {
constexpr double kSpeedOfLight = 299792458.0;
}

double sample_velocity(double gamma, Rng& rng) {
  if (gamma <= 0) throw ContractError("sample_velocity: gamma must be positive");
  return rng.rayleigh(gamma);
}

// h_i = (1/sqrt(P)) sum_p g_p a(theta_p, phi_p) exp(j(2 pi f_d cos(alpha_p) i T_slot + psi_p))
//
// Per path: g_p unit circular Gaussian, psi_p uniform phase, alpha_p uniform
// angle to the motion direction, phi_p uniform azimuth within the sector,
// theta_p the geometric downtilt of a range drawn uniformly in
// [range_min, range_max]. The URA has half-wavelength spacing; the steering
// phase for element (mv, mh) is pi*(mh cos(theta) sin(phi) - mv sin(theta)).
ComplexFrame generate_frame(const ScenarioConfig& cfg, double velocity_mps, Rng& rng) {
  cfg.validate();
  if (velocity_mps < 0) throw ContractError("generate_frame: velocity must be >= 0");
  const int64_t m = cfg.antennas();
  const int64_t p_count = cfg.paths;
  const double f_doppler = velocity_mps * cfg.carrier_hz / kSpeedOfLight;
  const double sector_rad = cfg.sector_deg * std::numbers::pi / 180.0;
  const double height_diff = cfg.bs_height_m - cfg.ut_height_m;

  std::vector<std::complex<double>> gains(static_cast<size_t>(p_count));
  std::vector<double> doppler_phase_per_slot(static_cast<size_t>(p_count));
  std::vector<std::complex<double>> steering(static_cast<size_t>(p_count * m));
  for (int64_t p = 0; p < p_count; ++p) {
    const double g_re = rng.normal() / std::numbers::sqrt2;
    const double g_im = rng.normal() / std::numbers::sqrt2;
    const double psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double alpha = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double phi = rng.uniform(-0.5 * sector_rad, 0.5 * sector_rad);
    const double range = rng.uniform(cfg.range_min_m, cfg.range_max_m);
    const double theta = std::atan2(height_diff, range);

    gains[static_cast<size_t>(p)] =
        std::complex<double>(g_re, g_im) * std::polar(1.0, psi);
    doppler_phase_per_slot[static_cast<size_t>(p)] =
        2.0 * std::numbers::pi * f_doppler * std::cos(alpha) * cfg.t_slot_s;
    const double horiz = std::cos(theta) * std::sin(phi);
    const double vert = -std::sin(theta);
    for (int64_t mv = 0; mv < cfg.antennas_v; ++mv)
      for (int64_t mh = 0; mh < cfg.antennas_h; ++mh) {
        const double phase = std::numbers::pi * (mh * horiz + mv * vert);
        steering[static_cast<size_t>(p * m + mv * cfg.antennas_h + mh)] = std::polar(1.0, phase);
      }
  }

  ComplexFrame frame;
  frame.n_slot = cfg.n_slot;
  frame.m = m;
  frame.velocity_mps = static_cast<float>(velocity_mps);
  frame.snapshots.resize(static_cast<size_t>(cfg.n_slot * m));
  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(p_count));
  for (int64_t slot = 0; slot < cfg.n_slot; ++slot) {
    for (int64_t ant = 0; ant < m; ++ant) {
      std::complex<double> acc(0.0, 0.0);
      for (int64_t p = 0; p < p_count; ++p) {
        const std::complex<double> rot =
            std::polar(1.0, doppler_phase_per_slot[static_cast<size_t>(p)] * slot);
        acc += gains[static_cast<size_t>(p)] * steering[static_cast<size_t>(p * m + ant)] * rot;
      }
      acc *= inv_sqrt_p;
      frame.snapshots[static_cast<size_t>(slot * m + ant)] =
          std::complex<float>(static_cast<float>(acc.real()), static_cast<float>(acc.imag()));
    }
  }
  return frame;
}

ComplexFrame normalize_pathgain(const ComplexFrame& frame) {
  double energy = 0.0;
  for (const auto& v : frame.snapshots) energy += std::norm(std::complex<double>(v));
  if (energy <= 0.0) throw ContractError("normalize_pathgain: all-zero frame");
  // mean_i ||h_i||^2 == M  <=>  total energy == n_slot * M
  const double target = static_cast<double>(frame.n_slot) * static_cast<double>(frame.m);
  const double scale = std::sqrt(target / energy);
  ComplexFrame out = frame;
  out.pathgain_norm = static_cast<float>(scale);
  for (auto& v : out.snapshots) v *= static_cast<float>(scale);
  return out;
}

double snr_to_sigma(const std::vector<ComplexFrame>& frames, double snr_db) {
  if (frames.empty()) throw ContractError("snr_to_sigma: empty dataset");
  double energy = 0.0;
  int64_t slots = 0;
  for (const auto& f : frames) {
    for (const auto& v : f.snapshots) energy += std::norm(std::complex<double>(v));
    slots += f.n_slot;
  }
  const double mean_snapshot_norm2 = energy / static_cast<double>(slots);
  const double m = static_cast<double>(frames.front().m);
  return mean_snapshot_norm2 / (m * std::pow(10.0, snr_db / 10.0));
}

ComplexFrame add_noise(const ComplexFrame& frame, double sigma2, Rng& rng) {
  if (sigma2 < 0) throw ContractError("add_noise: sigma2 must be >= 0");
  ComplexFrame out = frame;
  if (sigma2 == 0.0) return out;
  const double s = std::sqrt(sigma2 / 2.0);
  for (auto& v : out.snapshots) {
    const float re = static_cast<float>(rng.normal() * s);
    const float im = static_cast<float>(rng.normal() * s);
    v += std::complex<float>(re, im);
  }
  return out;
}

RealSequence to_real(const ComplexFrame& frame) {
  RealSequence seq;
  seq.n_slot = frame.n_slot;
  seq.dim = 2 * frame.m;
  seq.data.resize(static_cast<size_t>(frame.n_slot * seq.dim));
  for (int64_t slot = 0; slot < frame.n_slot; ++slot)
    for (int64_t ant = 0; ant < frame.m; ++ant) {
      const auto v = frame.at(slot, ant);
      seq.data[static_cast<size_t>(slot * seq.dim + ant)] = v.real();
      seq.data[static_cast<size_t>(slot * seq.dim + frame.m + ant)] = v.imag();
    }
  return seq;
}

ComplexFrame to_complex(const RealSequence& seq) {
  ComplexFrame frame;
  frame.n_slot = seq.n_slot;
  frame.m = seq.dim / 2;
  frame.snapshots.resize(static_cast<size_t>(frame.n_slot * frame.m));
  for (int64_t slot = 0; slot < frame.n_slot; ++slot)
    for (int64_t ant = 0; ant < frame.m; ++ant)
      frame.snapshots[static_cast<size_t>(slot * frame.m + ant)] =
          std::complex<float>(seq.data[static_cast<size_t>(slot * seq.dim + ant)],
                              seq.data[static_cast<size_t>(slot * seq.dim + frame.m + ant)]);
  return frame;
}

std::vector<uint8_t> assign_splits(const std::vector<float>& velocities,
                                   const std::vector<double>& ratios, Rng& rng,
                                   bool* stratified_out, int64_t bins) {
  const int64_t n = static_cast<int64_t>(velocities.size());
  double ratio_sum = 0;
  for (double r : ratios) ratio_sum += r;
  if (std::abs(ratio_sum - 1.0) > 1e-9) throw ContractError("assign_splits: ratios must sum to 1");
  const size_t n_splits = ratios.size();

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  const bool stratified = n >= bins;
  if (stratified_out) *stratified_out = stratified;

  std::vector<std::vector<int64_t>> bin_members;
  if (stratified) {
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      if (velocities[static_cast<size_t>(a)] != velocities[static_cast<size_t>(b)])
        return velocities[static_cast<size_t>(a)] < velocities[static_cast<size_t>(b)];
      return a < b;
    });
    for (int64_t b = 0; b < bins; ++b) {
      const int64_t lo = b * n / bins, hi = (b + 1) * n / bins;
      bin_members.emplace_back(order.begin() + lo, order.begin() + hi);
    }
  } else {
    bin_members.push_back(order);
  }

  std::vector<uint8_t> out(static_cast<size_t>(n), 0);
  std::vector<double> carry(n_splits, 0.0);
  for (auto& members : bin_members) {
    rng.shuffle(members);
    const int64_t sz = static_cast<int64_t>(members.size());
    // largest-remainder allocation with carry so global counts stay exact
    std::vector<int64_t> take(n_splits, 0);
    std::vector<std::pair<double, size_t>> frac;
    int64_t assigned = 0;
    for (size_t s = 0; s < n_splits; ++s) {
      const double ideal = ratios[s] * sz + carry[s];
      take[s] = static_cast<int64_t>(std::floor(ideal));
      if (take[s] < 0) take[s] = 0;
      frac.emplace_back(ideal - take[s], s);
      assigned += take[s];
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (size_t i = 0; assigned < sz; ++i, ++assigned) take[frac[i % n_splits].second] += 1;
    for (size_t s = 0; s < n_splits; ++s) carry[s] += ratios[s] * sz - take[s];

    int64_t pos = 0;
    for (size_t s = 0; s < n_splits; ++s)
      for (int64_t k = 0; k < take[s]; ++k, ++pos)
        out[static_cast<size_t>(members[static_cast<size_t>(pos)])] = static_cast<uint8_t>(s);
  }
  return out;
}

Dataset generate_dataset(const ScenarioConfig& cfg, int64_t n_frames, uint64_t seed) {
  cfg.validate();
  if (n_frames < 1) throw ContractError("generate_dataset: need at least one frame");
  Dataset ds;
  ds.scenario = cfg;
  ds.seed = seed;
  ds.frames.reserve(static_cast<size_t>(n_frames));
  Rng base(seed);
  for (int64_t i = 0; i < n_frames; ++i) {
    Rng frame_rng = base.derive(static_cast<uint64_t>(i));
    const double v = sample_velocity(cfg.rayleigh_scale, frame_rng);
    ds.frames.push_back(normalize_pathgain(generate_frame(cfg, v, frame_rng)));
  }
  std::vector<float> velocities;
  velocities.reserve(ds.frames.size());
  for (const auto& f : ds.frames) velocities.push_back(f.velocity_mps);
  Rng split_rng = base.derive(0x5B117ull);
  ds.split = assign_splits(velocities, {0.8, 0.1, 0.1}, split_rng, &ds.stratified);
  return ds;
}

}  // namespace csipred::chan
