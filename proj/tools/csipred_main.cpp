// Command-line front end: dataset generation, training, evaluation, sweeps,
// parameter audits and gradient checks. Every run is reproducible from its
// single --seed; each subcommand persists the resolved configuration next to
// its outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "csipred/models/checkpoint.hpp"
#include "csipred/nn/gradcheck.hpp"
#include "csipred/train/sweep.hpp"

namespace fs = std::filesystem;
using namespace csipred;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("CSIPRED_OUT_DIR");
  return env && *env ? env : ".";
}

void write_resolved_config(const std::string& out_dir, const std::string& subcommand,
                           const nlohmann::json& resolved) {
  fs::create_directories(out_dir);
  const std::string path = out_dir + "/resolved_config_" + subcommand + ".json";
  std::ofstream os(path, std::ios::trunc);
  os << resolved.dump(2) << "\n";
  if (!os) throw TrainingError("cannot write " + path);
}

nlohmann::json scenario_to_json(const chan::ScenarioConfig& s) {
  return {{"antennas_v", s.antennas_v}, {"antennas_h", s.antennas_h},
          {"n_slot", s.n_slot},         {"t_slot_s", s.t_slot_s},
          {"carrier_hz", s.carrier_hz}, {"paths", s.paths},
          {"rayleigh_scale", s.rayleigh_scale}, {"sector_deg", s.sector_deg},
          {"range_min_m", s.range_min_m}, {"range_max_m", s.range_max_m},
          {"bs_height_m", s.bs_height_m}, {"ut_height_m", s.ut_height_m}};
}

std::vector<std::pair<int64_t, int64_t>> parse_lengths(const std::string& spec) {
  std::vector<std::pair<int64_t, int64_t>> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ContractError("--lengths expects l:delta pairs, got '" + item + "'");
    out.emplace_back(std::stoll(item.substr(0, colon)), std::stoll(item.substr(colon + 1)));
  }
  if (out.empty()) throw ContractError("--lengths is empty");
  return out;
}

void append_records_csv(const std::string& path,
                        const std::vector<train::ExperimentRecord>& records) {
  const bool fresh = !fs::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw TrainingError("cannot open " + path);
  if (fresh) os << train::kCsvHeader << "\n";
  for (const auto& r : records) os << train::csv_line(r) << "\n";
}

void print_audit(const models::ParamAudit& audit) {
  std::printf("model: %s\n", audit.family.c_str());
  for (const auto& b : audit.blocks) std::printf("  %-32s %10lld\n", b.name.c_str(),
                                                 static_cast<long long>(b.count));
  std::printf("  %-32s %10lld\n", "total", static_cast<long long>(audit.total));
  if (audit.reference) {
    const double pct = 100.0 * static_cast<double>(audit.delta_vs_reference()) /
                       static_cast<double>(*audit.reference);
    std::printf("  %-32s %10lld\n", "reference", static_cast<long long>(*audit.reference));
    std::printf("  %-32s %+10lld (%+.3f%%)\n", "delta", static_cast<long long>(audit.delta_vs_reference()), pct);
  } else {
    std::printf("  %-32s %10s\n", "reference", "n/a");
  }
}

struct TrainCliOptions {
  std::string dataset_path;
  std::string model_id;
  std::string out_dir = default_out_dir();
  std::string profile = "desk";
  double snr_db = 20.0;
  uint64_t seed = 1;
  int64_t epochs = -1;      // -1 = profile default
  int64_t batch_size = -1;
  double lr = 1e-3;
  int64_t l_train = 16;
  int64_t delta_train = 4;
  bool fresh_noise = false;

  train::TrainConfig to_train_config() const {
    train::TrainConfig cfg =
        profile == "full" ? train::TrainConfig{} : train::TrainConfig::desk_scale();
    if (epochs > 0) cfg.epochs = epochs;
    if (batch_size > 0) cfg.batch_size = batch_size;
    cfg.lr = lr;
    cfg.l_train = l_train;
    cfg.delta_train = delta_train;
    cfg.snr_db = snr_db;
    cfg.seed = seed;
    cfg.fresh_noise_per_epoch = fresh_noise;
    return cfg;
  }

  nlohmann::json to_json() const {
    const auto cfg = to_train_config();
    return {{"dataset", dataset_path}, {"model", model_id},   {"out_dir", out_dir},
            {"profile", profile},      {"snr_db", cfg.snr_db}, {"seed", cfg.seed},
            {"epochs", cfg.epochs},    {"batch_size", cfg.batch_size}, {"lr", cfg.lr},
            {"l_train", cfg.l_train},  {"delta_train", cfg.delta_train},
            {"fresh_noise_per_epoch", cfg.fresh_noise_per_epoch}};
  }
};

void add_train_options(CLI::App* cmd, TrainCliOptions& o, bool require_model) {
  cmd->add_option("--dataset", o.dataset_path, "dataset file")->required();
  if (require_model)
    cmd->add_option("--model", o.model_id, "model family")->required();
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--profile", o.profile, "training profile: desk (60 epochs, batch 100) or full (500 epochs, batch 200)")
      ->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--snr-db", o.snr_db, "training SNR in dB");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--epochs", o.epochs, "override epoch count");
  cmd->add_option("--batch-size", o.batch_size, "override batch size");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--l-train", o.l_train, "known history length");
  cmd->add_option("--delta-train", o.delta_train, "prediction horizon");
  cmd->add_flag("--fresh-noise", o.fresh_noise, "redraw observation noise each epoch");
}

std::string checkpoint_name(const std::string& out_dir, const std::string& model_id,
                            double snr_db, uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "_snr%g_seed%llu", snr_db,
                static_cast<unsigned long long>(seed));
  return out_dir + "/" + model_id + buf + ".ckpt";
}

int run_train(const TrainCliOptions& o) {
  fs::create_directories(o.out_dir);
  write_resolved_config(o.out_dir, "train", o.to_json());
  auto dataset = chan::load_dataset(o.dataset_path);
  const auto family = models::family_from_name(o.model_id);
  models::ModelDims dims;
  dims.input_dim = 2 * dataset.scenario.antennas();
  dims.l_train = o.l_train;
  dims.delta_train = o.delta_train;
  dims.sync();
  auto bundle = models::ModelBundle<float>::create(family, dims, o.seed);
  const auto cfg = o.to_train_config();
  auto result = train::train(bundle, dataset, cfg);

  const std::string ckpt = checkpoint_name(o.out_dir, o.model_id, o.snr_db, o.seed);
  models::save_checkpoint(bundle, ckpt,
                          {{"seed", o.seed},
                           {"snr_db", o.snr_db},
                           {"dataset", o.dataset_path},
                           {"best_epoch", result.best_epoch},
                           {"best_val_nmse", result.best_val_nmse},
                           {"l_train", cfg.l_train},
                           {"delta_train", cfg.delta_train}});

  const std::string hist_path = ckpt + ".history.csv";
  std::ofstream hs(hist_path, std::ios::trunc);
  hs << "epoch,train_loss,val_nmse\n";
  for (const auto& e : result.history) {
    char line[128];
    std::snprintf(line, sizeof(line), "%lld,%.9g,%.9g\n", static_cast<long long>(e.epoch),
                  e.train_loss, e.val_nmse);
    hs << line;
  }
  std::printf("trained %s at %.1f dB: best epoch %lld, validation NMSE %.6g\n",
              o.model_id.c_str(), o.snr_db, static_cast<long long>(result.best_epoch),
              result.best_val_nmse);
  std::printf("checkpoint: %s\nhistory:    %s\n", ckpt.c_str(), hist_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSI sequence prediction toolkit (channel simulator, attention models, baselines)"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a config file");

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "generate a synthetic channel dataset");
  std::string gen_out = default_out_dir() + "/dataset.bin";
  int64_t gen_frames = 2000;
  uint64_t gen_seed = 1;
  bool gen_force = false;
  chan::ScenarioConfig scenario;
  double t_slot_ms = 0.5, carrier_ghz = 2.6;
  gen->add_option("--out", gen_out, "output dataset path");
  gen->add_option("--frames", gen_frames, "number of frames");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_flag("--force", gen_force, "overwrite an existing dataset");
  gen->add_option("--antennas-v", scenario.antennas_v, "vertical array elements");
  gen->add_option("--antennas-h", scenario.antennas_h, "horizontal array elements");
  gen->add_option("--n-slot", scenario.n_slot, "slots per frame");
  gen->add_option("--t-slot-ms", t_slot_ms, "slot duration in ms");
  gen->add_option("--carrier-ghz", carrier_ghz, "carrier frequency in GHz");
  gen->add_option("--paths", scenario.paths, "propagation paths");
  gen->add_option("--rayleigh-scale", scenario.rayleigh_scale, "velocity Rayleigh scale (m/s)");
  gen->add_option("--sector-deg", scenario.sector_deg, "azimuth sector width");
  gen->add_option("--range-min", scenario.range_min_m, "minimum user distance (m)");
  gen->add_option("--range-max", scenario.range_max_m, "maximum user distance (m)");
  gen->add_option("--bs-height", scenario.bs_height_m, "base-station height (m)");
  gen->add_option("--ut-height", scenario.ut_height_m, "user height (m)");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train one model at one SNR");
  TrainCliOptions train_opts;
  add_train_options(tr, train_opts, /*require_model=*/true);

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint at given lengths");
  std::string ev_ckpt, ev_dataset, ev_out_dir = default_out_dir(), ev_csv;
  double ev_snr = 20.0;
  int64_t ev_l = 16, ev_delta = 4;
  uint64_t ev_seed = 1;
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--dataset", ev_dataset, "dataset file")->required();
  ev->add_option("--out-dir", ev_out_dir, "output directory");
  ev->add_option("--csv", ev_csv, "records CSV (default <out-dir>/records.csv)");
  ev->add_option("--snr-db", ev_snr, "evaluation SNR in dB");
  ev->add_option("--l", ev_l, "known history length");
  ev->add_option("--delta", ev_delta, "prediction horizon");
  ev->add_option("--seed", ev_seed, "noise seed");

  // ---- sweep ----
  auto* sw = app.add_subcommand("sweep", "train and evaluate a model/SNR/length grid");
  TrainCliOptions sweep_opts;
  add_train_options(sw, sweep_opts, /*require_model=*/false);
  std::string sw_models = "transformer-rpe,transformer-pe,transformer-parallel,seq2seq-attn-r,lstm,mlp,mar";
  std::string sw_snrs = "-5,0,5,10,15,20";
  std::string sw_lengths = "16:4,8:2,14:6";
  std::string sw_seeds = "1";
  bool sw_no_lvh = false;
  sw->add_option("--models", sw_models, "comma-separated model families");
  sw->add_option("--snr-grid", sw_snrs, "comma-separated SNR values (dB)");
  sw->add_option("--lengths", sw_lengths, "comma-separated l:delta pairs");
  sw->add_option("--seeds", sw_seeds, "comma-separated seeds");
  sw->add_flag("--no-lvh", sw_no_lvh, "skip the last-value-hold comparator rows");

  // ---- paramcount ----
  auto* pc = app.add_subcommand("paramcount", "per-block parameter audit");
  std::string pc_model = "all";
  pc->add_option("--model", pc_model, "model family or 'all'");

  // ---- gradcheck ----
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check (tiny config, float64)");
  std::string gc_model = "all";
  int64_t gc_probes = 120;
  uint64_t gc_seed = 2024;
  gc->add_option("--model", gc_model, "model family or 'all'");
  gc->add_option("--probes", gc_probes, "sampled parameter coordinates");
  gc->add_option("--seed", gc_seed, "probe seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      scenario.t_slot_s = t_slot_ms * 1e-3;
      scenario.carrier_hz = carrier_ghz * 1e9;
      const std::string out_dir = fs::path(gen_out).has_parent_path()
                                      ? fs::path(gen_out).parent_path().string()
                                      : ".";
      fs::create_directories(out_dir);
      write_resolved_config(out_dir, "generate",
                            {{"out", gen_out},
                             {"frames", gen_frames},
                             {"seed", gen_seed},
                             {"force", gen_force},
                             {"scenario", scenario_to_json(scenario)}});
      auto ds = chan::generate_dataset(scenario, gen_frames, gen_seed);
      chan::save_dataset(ds, gen_out, gen_force);
      std::printf("wrote %lld frames (train/val/test = %lld/%lld/%lld) to %s\n",
                  static_cast<long long>(ds.frames.size()),
                  static_cast<long long>(ds.count(chan::Split::train)),
                  static_cast<long long>(ds.count(chan::Split::validation)),
                  static_cast<long long>(ds.count(chan::Split::test)), gen_out.c_str());
      return 0;
    }

    if (*tr) return run_train(train_opts);

    if (*ev) {
      fs::create_directories(ev_out_dir);
      if (ev_csv.empty()) ev_csv = ev_out_dir + "/records.csv";
      write_resolved_config(ev_out_dir, "evaluate",
                            {{"checkpoint", ev_ckpt}, {"dataset", ev_dataset},
                             {"csv", ev_csv},        {"snr_db", ev_snr},
                             {"l", ev_l},            {"delta", ev_delta},
                             {"seed", ev_seed}});
      auto dataset = chan::load_dataset(ev_dataset);
      auto bundle = models::load_checkpoint(ev_ckpt);
      auto rec = train::evaluate(bundle, dataset, ev_snr, ev_l, ev_delta, ev_seed, ev_ckpt);
      append_records_csv(ev_csv, {rec});
      std::printf("%s\n%s\n", train::kCsvHeader, train::csv_line(rec).c_str());
      if (!rec.supported)
        std::printf("note: %s does not support (l=%lld, delta=%lld); recorded as unsupported\n",
                    rec.model_id.c_str(), static_cast<long long>(ev_l),
                    static_cast<long long>(ev_delta));
      return 0;
    }

    if (*sw) {
      fs::create_directories(sweep_opts.out_dir);
      auto dataset = chan::load_dataset(sweep_opts.dataset_path);
      train::SweepConfig cfg;
      cfg.train_cfg = sweep_opts.to_train_config();
      cfg.dims.input_dim = 2 * dataset.scenario.antennas();
      cfg.dims.l_train = cfg.train_cfg.l_train;
      cfg.dims.delta_train = cfg.train_cfg.delta_train;
      cfg.dims.sync();
      cfg.out_dir = sweep_opts.out_dir;
      cfg.include_lvh = !sw_no_lvh;
      {
        std::stringstream ss(sw_models);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.model_ids.push_back(item);
      }
      cfg.snr_grid.clear();
      {
        std::stringstream ss(sw_snrs);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.snr_grid.push_back(std::stod(item));
      }
      cfg.lengths = parse_lengths(sw_lengths);
      cfg.seeds.clear();
      {
        std::stringstream ss(sw_seeds);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.seeds.push_back(std::stoull(item));
      }
      nlohmann::json resolved = sweep_opts.to_json();
      resolved["models"] = cfg.model_ids;
      resolved["snr_grid"] = cfg.snr_grid;
      resolved["lengths"] = sw_lengths;
      resolved["seeds"] = cfg.seeds;
      write_resolved_config(sweep_opts.out_dir, "sweep", resolved);

      auto result = train::sweep(dataset, cfg);
      const std::string csv_path = sweep_opts.out_dir + "/sweep.csv";
      train::write_csv(csv_path, result.records);

      // gnuplot-ready pivot per length pair: snr column, one column per
      // model with the seed-mean NMSE
      for (const auto& [l, delta] : cfg.lengths) {
        std::vector<std::string> columns = cfg.model_ids;
        if (cfg.include_lvh) columns.push_back("last-value-hold");
        std::ofstream ps(sweep_opts.out_dir + "/plot_l" + std::to_string(l) + "_d" +
                         std::to_string(delta) + ".dat");
        ps << "# NMSE vs SNR at l=" << l << ", delta=" << delta << "\n# snr";
        for (const auto& m : columns) ps << " " << m;
        ps << "\n";
        for (double snr : cfg.snr_grid) {
          ps << snr;
          for (const auto& m : columns) {
            double sum = 0;
            int count = 0;
            for (const auto& r : result.records)
              if (r.model_id == m && r.snr_db == snr && r.l == l && r.delta == delta &&
                  r.supported) {
                sum += r.nmse;
                ++count;
              }
            if (count > 0) {
              char buf[32];
              std::snprintf(buf, sizeof(buf), " %.9g", sum / count);
              ps << buf;
            } else {
              ps << " nan";
            }
          }
          ps << "\n";
        }
      }
      std::printf("wrote %lld records to %s\n", static_cast<long long>(result.records.size()),
                  csv_path.c_str());
      for (const auto& f : result.failures) std::fprintf(stderr, "cell failed: %s\n", f.c_str());
      return result.failures.empty() ? 0 : 2;
    }

    if (*pc) {
      models::ModelDims dims;
      auto report = [&](models::ModelFamily fam) {
        if (fam == models::ModelFamily::mar) {
          const int64_t p = (dims.l_train * dims.input_dim + 1) * dims.input_dim;
          std::printf("model: mar (order %lld)\n  %-32s %10lld\n  %-32s %10s\n",
                      static_cast<long long>(dims.l_train), "coefficients",
                      static_cast<long long>(p), "reference", "n/a");
          return;
        }
        auto bundle = models::ModelBundle<float>::create(fam, dims, 1);
        print_audit(bundle.audit());
      };
      if (pc_model == "all") {
        for (const auto& [fam, name] : models::family_names()) {
          report(fam);
          std::printf("\n");
        }
      } else {
        report(models::family_from_name(pc_model));
      }
      return 0;
    }

    if (*gc) {
      auto check = [&](models::ModelFamily fam) {
        models::ModelDims dims = models::ModelDims::tiny();
        auto bundle = models::ModelBundle<double>::create(fam, dims, gc_seed);
        Rng rng = Rng(gc_seed).derive(5);
        std::vector<double> kv(static_cast<size_t>(2 * dims.l_train * dims.input_dim));
        for (auto& v : kv) v = rng.uniform(-1.0, 1.0);
        std::vector<double> dv(static_cast<size_t>(2 * dims.delta_train * dims.input_dim));
        for (auto& v : dv) v = rng.uniform(-1.0, 1.0);
        nn::Tensor<double> known =
            nn::Tensor<double>::from_data({2, dims.l_train, dims.input_dim}, kv);
        nn::Tensor<double> dec_in =
            nn::Tensor<double>::from_data({2, dims.delta_train, dims.input_dim}, dv);
        auto loss_fn = [&]() {
          auto out = bundle.training_forward(known, dec_in);
          return nn::mean_all(nn::mul(out, out));
        };
        auto params = bundle.params();
        Rng prng = Rng(gc_seed).derive(7);
        auto report = nn::grad_check<double>(loss_fn, params, gc_probes, prng, 1e-5);
        const bool pass = report.max_rel_err < 1e-4;
        std::printf("%-22s max relative error %.3e over %lld probes: %s\n",
                    models::family_name(fam).c_str(), report.max_rel_err,
                    static_cast<long long>(report.probes), pass ? "PASS" : "FAIL");
        return pass;
      };
      bool all_pass = true;
      if (gc_model == "all") {
        for (const auto& [fam, name] : models::family_names())
          if (models::family_is_gradient_trained(fam)) all_pass = check(fam) && all_pass;
      } else {
        all_pass = check(models::family_from_name(gc_model));
      }
      return all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
