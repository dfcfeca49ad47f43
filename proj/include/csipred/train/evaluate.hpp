#pragma once

// Clean-target scoring of trained models plus the naive last-value-hold
// comparator and the experiment-record CSV schema.

#include <cstdint>
#include <string>
#include <vector>

#include "csipred/channel/dataset.hpp"
#include "csipred/models/bundle.hpp"
#include "csipred/train/frames.hpp"

namespace csipred::train {

struct ExperimentRecord {
  std::string model_id;
  double snr_db = 0.0;
  int64_t l = 0;
  int64_t delta = 0;
  double nmse = 0.0;  // NaN when unsupported
  uint64_t seed = 0;
  double runtime_s = 0.0;
  std::string checkpoint;
  bool supported = true;
};

// Predicts from l noisy snapshots and scores against the clean snapshots
// l+1 .. l+delta of the test split. Length combinations a family cannot
// serve come back with supported=false and NaN NMSE.
ExperimentRecord evaluate(models::ModelBundle<float>& bundle, const chan::Dataset& dataset,
                          double snr_db, int64_t l, int64_t delta, uint64_t seed,
                          const std::string& checkpoint = "");

// Repeats the last known snapshot for all delta outputs.
nn::Tensor<float> last_value_hold(const nn::Tensor<float>& known, int64_t delta);

// Evaluation record for the last-value-hold comparator.
ExperimentRecord evaluate_last_value_hold(const chan::Dataset& dataset, double snr_db,
                                          int64_t l, int64_t delta, uint64_t seed);

inline constexpr const char* kCsvHeader = "model,snr_db,l,delta,nmse,seed,runtime_s,checkpoint";

std::string csv_line(const ExperimentRecord& r);
void write_csv(const std::string& path, const std::vector<ExperimentRecord>& records);

}  // namespace csipred::train
