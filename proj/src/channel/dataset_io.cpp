// Dataset persistence. Versioned little-endian binary: magic, version,
// scenario block, provenance, then one record per frame (split tag,
// velocity, path-gain scale, interleaved re/im float32 snapshots). A JSON
// sidecar <path>.json carries the scenario and split counts for humans.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "csipred/channel/dataset.hpp"

namespace csipred::chan {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'I', 'P', 'D', 'S', 'E', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  put_u32(os, static_cast<uint32_t>(v));
  put_u32(os, static_cast<uint32_t>(v >> 32));
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

void put_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

uint64_t get_u64(std::istream& is) {
  const uint64_t lo = get_u32(is);
  const uint64_t hi = get_u32(is);
  return lo | hi << 32;
}

float get_f32(std::istream& is) {
  const uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double get_f64(std::istream& is) {
  const uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

nlohmann::json scenario_json(const ScenarioConfig& s) {
  return nlohmann::json{{"antennas_v", s.antennas_v},
                        {"antennas_h", s.antennas_h},
                        {"n_slot", s.n_slot},
                        {"t_slot_s", s.t_slot_s},
                        {"carrier_hz", s.carrier_hz},
                        {"paths", s.paths},
                        {"rayleigh_scale_mps", s.rayleigh_scale},
                        {"sector_deg", s.sector_deg},
                        {"range_min_m", s.range_min_m},
                        {"range_max_m", s.range_max_m},
                        {"bs_height_m", s.bs_height_m},
                        {"ut_height_m", s.ut_height_m}};
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path, bool force) {
  if (!force && std::filesystem::exists(path))
    throw ContractError("save_dataset: '" + path + "' exists (use force to overwrite)");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw TrainingError("save_dataset: cannot open '" + path + "'");

  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_u32(os, static_cast<uint32_t>(ds.scenario.antennas_v));
  put_u32(os, static_cast<uint32_t>(ds.scenario.antennas_h));
  put_u32(os, static_cast<uint32_t>(ds.scenario.n_slot));
  put_u32(os, static_cast<uint32_t>(ds.scenario.paths));
  put_f64(os, ds.scenario.t_slot_s);
  put_f64(os, ds.scenario.carrier_hz);
  put_f64(os, ds.scenario.rayleigh_scale);
  put_f64(os, ds.scenario.sector_deg);
  put_f64(os, ds.scenario.range_min_m);
  put_f64(os, ds.scenario.range_max_m);
  put_f64(os, ds.scenario.bs_height_m);
  put_f64(os, ds.scenario.ut_height_m);
  put_u64(os, ds.seed);
  put_u32(os, ds.stratified ? 1 : 0);
  put_u32(os, static_cast<uint32_t>(ds.generator_version.size()));
  os.write(ds.generator_version.data(), static_cast<std::streamsize>(ds.generator_version.size()));
  put_u64(os, ds.frames.size());
  for (size_t i = 0; i < ds.frames.size(); ++i) {
    const auto& f = ds.frames[i];
    put_u32(os, ds.split[i]);
    put_f32(os, f.velocity_mps);
    put_f32(os, f.pathgain_norm);
    for (const auto& v : f.snapshots) {
      put_f32(os, v.real());
      put_f32(os, v.imag());
    }
  }
  if (!os) throw TrainingError("save_dataset: write failed for '" + path + "'");
  os.close();

  // calibrated noise variances for the standard SNR grid, for reference
  nlohmann::json sigma_table = nlohmann::json::object();
  for (double snr : {-5.0, 0.0, 5.0, 10.0, 15.0, 20.0}) {
    char key[16];
    std::snprintf(key, sizeof(key), "%g", snr);
    sigma_table[key] = snr_to_sigma(ds.frames, snr);
  }
  nlohmann::json side{{"format", "csipred-dataset"},
                      {"version", kVersion},
                      {"generator", ds.generator_version},
                      {"seed", ds.seed},
                      {"stratified", ds.stratified},
                      {"frames", ds.frames.size()},
                      {"split_counts",
                       {{"train", ds.count(Split::train)},
                        {"validation", ds.count(Split::validation)},
                        {"test", ds.count(Split::test)}}},
                      {"sigma_n2_by_snr_db", sigma_table},
                      {"scenario", scenario_json(ds.scenario)}};
  std::ofstream js(path + ".json", std::ios::trunc);
  js << side.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TrainingError("load_dataset: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw ContractError("load_dataset: '" + path + "' is not a dataset file");
  const uint32_t version = get_u32(is);
  if (version != kVersion)
    throw ContractError("load_dataset: unsupported version " + std::to_string(version));

  Dataset ds;
  ds.scenario.antennas_v = get_u32(is);
  ds.scenario.antennas_h = get_u32(is);
  ds.scenario.n_slot = get_u32(is);
  ds.scenario.paths = get_u32(is);
  ds.scenario.t_slot_s = get_f64(is);
  ds.scenario.carrier_hz = get_f64(is);
  ds.scenario.rayleigh_scale = get_f64(is);
  ds.scenario.sector_deg = get_f64(is);
  ds.scenario.range_min_m = get_f64(is);
  ds.scenario.range_max_m = get_f64(is);
  ds.scenario.bs_height_m = get_f64(is);
  ds.scenario.ut_height_m = get_f64(is);
  ds.seed = get_u64(is);
  ds.stratified = get_u32(is) != 0;
  const uint32_t gv_len = get_u32(is);
  ds.generator_version.resize(gv_len);
  is.read(ds.generator_version.data(), gv_len);
  const uint64_t n_frames = get_u64(is);
  const int64_t m = ds.scenario.antennas();
  ds.frames.reserve(n_frames);
  ds.split.reserve(n_frames);
  for (uint64_t i = 0; i < n_frames; ++i) {
    ds.split.push_back(static_cast<uint8_t>(get_u32(is)));
    ComplexFrame f;
    f.n_slot = ds.scenario.n_slot;
    f.m = m;
    f.velocity_mps = get_f32(is);
    f.pathgain_norm = get_f32(is);
    f.snapshots.resize(static_cast<size_t>(f.n_slot * m));
    for (auto& v : f.snapshots) {
      const float re = get_f32(is);
      const float im = get_f32(is);
      v = std::complex<float>(re, im);
    }
    ds.frames.push_back(std::move(f));
  }
  if (!is) throw TrainingError("load_dataset: truncated file '" + path + "'");
  return ds;
}

}  // namespace csipred::chan
