#pragma once

// Dataset container: clean generated frames plus a velocity-stratified
// train/validation/test assignment, persisted as a versioned binary file
// with a JSON sidecar for scenario and provenance.

#include <cstdint>
#include <string>
#include <vector>

#include "csipred/channel/channel.hpp"

namespace csipred::chan {

inline constexpr const char* kGeneratorVersion = "sum-of-sinusoids-ura/1";

enum class Split : uint8_t { train = 0, validation = 1, test = 2 };

struct Dataset {
  ScenarioConfig scenario;
  uint64_t seed = 0;
  std::string generator_version = kGeneratorVersion;
  bool stratified = true;
  std::vector<ComplexFrame> frames;
  std::vector<uint8_t> split;  // Split per frame

  std::vector<int64_t> indices(Split s) const {
    std::vector<int64_t> out;
    for (size_t i = 0; i < split.size(); ++i)
      if (split[i] == static_cast<uint8_t>(s)) out.push_back(static_cast<int64_t>(i));
    return out;
  }

  int64_t count(Split s) const { return static_cast<int64_t>(indices(s).size()); }
};

// Velocity-stratified assignment (10 quantile bins) into ratios that must
// sum to 1; falls back to an unstratified shuffle when there are fewer
// frames than bins. Global split sizes match the ratios within one frame.
std::vector<uint8_t> assign_splits(const std::vector<float>& velocities,
                                   const std::vector<double>& ratios, Rng& rng,
                                   bool* stratified_out, int64_t bins = 10);

// Generates frames (velocity draw, sum-of-sinusoids, normalization) and
// splits them 80/10/10.
Dataset generate_dataset(const ScenarioConfig& cfg, int64_t n_frames, uint64_t seed);

// Binary format + sidecar <path>.json. save refuses to overwrite unless
// `force`.
void save_dataset(const Dataset& ds, const std::string& path, bool force = false);
Dataset load_dataset(const std::string& path);

}  // namespace csipred::chan
