#pragma once

// Realified dataset views at a fixed SNR. One noisy realization per frame is
// drawn once from a seed derived from (run seed, SNR), so two models trained
// at the same seed and SNR see identical noisy data. Clean sequences sit
// behind a firewall: while a guard is engaged (training and validation
// scoring), any clean read throws.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "csipred/channel/dataset.hpp"

namespace csipred::train {

class CleanFirewall {
 public:
  static bool engaged() { return depth() > 0; }
  static int64_t read_count() { return reads(); }
  static void note_read() {
    ++reads();
    if (engaged())
      throw ContractError("clean CSI accessed while the training firewall is engaged");
  }

  class Guard {
   public:
    Guard() { ++depth(); }
    ~Guard() { --depth(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;
  };

 private:
  static int& depth() {
    static thread_local int d = 0;
    return d;
  }
  static int64_t& reads() {
    static thread_local int64_t r = 0;
    return r;
  }
};

struct NoisyRealDataset {
  int64_t n_slot = 0;
  int64_t dim = 0;  // 2M
  double snr_db = 0.0;
  double sigma2 = 0.0;
  std::vector<int64_t> train_idx, val_idx, test_idx;

  const std::vector<float>& noisy_frame(int64_t i) const {
    return noisy_[static_cast<size_t>(i)];
  }
  // Test-time scoring only; throws when the firewall is engaged.
  const std::vector<float>& clean_frame(int64_t i) const {
    CleanFirewall::note_read();
    return clean_[static_cast<size_t>(i)];
  }

  std::vector<std::vector<float>> noisy_;
  std::vector<std::vector<float>> clean_;
};

inline uint64_t derive_noise_seed(uint64_t seed, double snr_db) {
  const int64_t key = static_cast<int64_t>(std::llround(snr_db * 1000.0));
  return splitmix64(splitmix64(seed ^ 0x6E01533Dull) ^ static_cast<uint64_t>(key));
}

inline NoisyRealDataset realify_with_noise(const chan::Dataset& ds, double snr_db,
                                           uint64_t seed) {
  NoisyRealDataset out;
  out.n_slot = ds.scenario.n_slot;
  out.dim = 2 * ds.scenario.antennas();
  out.snr_db = snr_db;
  out.sigma2 = chan::snr_to_sigma(ds.frames, snr_db);
  out.train_idx = ds.indices(chan::Split::train);
  out.val_idx = ds.indices(chan::Split::validation);
  out.test_idx = ds.indices(chan::Split::test);
  Rng base(derive_noise_seed(seed, snr_db));
  out.noisy_.reserve(ds.frames.size());
  out.clean_.reserve(ds.frames.size());
  for (size_t i = 0; i < ds.frames.size(); ++i) {
    Rng frame_rng = base.derive(static_cast<uint64_t>(i));
    out.noisy_.push_back(chan::to_real(chan::add_noise(ds.frames[i], out.sigma2, frame_rng)).data);
    out.clean_.push_back(chan::to_real(ds.frames[i]).data);
  }
  return out;
}

}  // namespace csipred::train
