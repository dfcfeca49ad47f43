#pragma once

// SNR x sequence-length experiment sweeps: per (seed, SNR, model) train once
// at the training lengths, then evaluate at every (l, delta) pair. The AR
// baseline is refit per l since its order is tied to the history length.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csipred/train/evaluate.hpp"
#include "csipred/train/trainer.hpp"

namespace csipred::train {

struct SweepConfig {
  std::vector<std::string> model_ids;
  std::vector<double> snr_grid{-5, 0, 5, 10, 15, 20};
  std::vector<std::pair<int64_t, int64_t>> lengths{{16, 4}, {8, 2}, {14, 6}};
  std::vector<uint64_t> seeds{1};
  TrainConfig train_cfg = TrainConfig::desk_scale();
  models::ModelDims dims;
  std::string out_dir;         // checkpoints land here; empty = no checkpoints
  bool include_lvh = true;     // add the last-value-hold comparator rows
};

struct SweepResult {
  std::vector<ExperimentRecord> records;
  std::vector<std::string> failures;  // one message per failed cell
};

SweepResult sweep(const chan::Dataset& dataset, const SweepConfig& cfg);

}  // namespace csipred::train
