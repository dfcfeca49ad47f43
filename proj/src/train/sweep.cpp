#include <filesystem>

#include "csipred/models/checkpoint.hpp"
#include "csipred/train/sweep.hpp"

namespace csipred::train {

SweepResult sweep(const chan::Dataset& dataset, const SweepConfig& cfg) {
  SweepResult result;
  for (uint64_t seed : cfg.seeds) {
    for (double snr : cfg.snr_grid) {
      for (const auto& model_id : cfg.model_ids) {
        const auto family = models::family_from_name(model_id);
        TrainConfig tc = cfg.train_cfg;
        tc.seed = seed;
        tc.snr_db = snr;
        try {
          if (family == models::ModelFamily::mar) {
            // order is tied to l: refit per evaluation length
            for (const auto& [l, delta] : cfg.lengths) {
              auto bundle = models::ModelBundle<float>::create(family, cfg.dims, seed);
              TrainConfig tl = tc;
              tl.l_train = l;
              tl.delta_train = delta;
              train(bundle, dataset, tl);
              std::string ckpt;
              if (!cfg.out_dir.empty()) {
                ckpt = cfg.out_dir + "/mar_order" + std::to_string(l) + "_snr" +
                       std::to_string(static_cast<long long>(snr)) + "_seed" +
                       std::to_string(seed) + ".ckpt";
                models::save_checkpoint(bundle, ckpt,
                                        {{"seed", seed}, {"snr_db", snr}, {"order", l}});
              }
              result.records.push_back(evaluate(bundle, dataset, snr, l, delta, seed, ckpt));
            }
            continue;
          }
          auto bundle = models::ModelBundle<float>::create(family, cfg.dims, seed);
          TrainResult tr = train(bundle, dataset, tc);
          std::string ckpt;
          if (!cfg.out_dir.empty()) {
            ckpt = cfg.out_dir + "/" + model_id + "_snr" +
                   std::to_string(static_cast<long long>(snr)) + "_seed" + std::to_string(seed) +
                   ".ckpt";
            models::save_checkpoint(bundle, ckpt,
                                    {{"seed", seed},
                                     {"snr_db", snr},
                                     {"best_epoch", tr.best_epoch},
                                     {"best_val_nmse", tr.best_val_nmse},
                                     {"l_train", tc.l_train},
                                     {"delta_train", tc.delta_train}});
          }
          for (const auto& [l, delta] : cfg.lengths)
            result.records.push_back(evaluate(bundle, dataset, snr, l, delta, seed, ckpt));
        } catch (const std::exception& e) {
          result.failures.push_back(model_id + " @ snr " + std::to_string(snr) + " seed " +
                                    std::to_string(seed) + ": " + e.what());
        }
      }
      if (cfg.include_lvh)
        for (const auto& [l, delta] : cfg.lengths)
          result.records.push_back(evaluate_last_value_hold(dataset, snr, l, delta, seed));
    }
  }
  return result;
}

}  // namespace csipred::train
