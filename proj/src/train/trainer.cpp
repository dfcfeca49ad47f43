#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "csipred/nn/adam.hpp"
#include "csipred/nn/ops.hpp"
#include "csipred/train/nmse.hpp"
#include "csipred/train/trainer.hpp"

namespace csipred::train {

namespace {

using TF = nn::Tensor<float>;

// Gathers rows [row0, row0+rows) of each listed frame into [B, rows, dim].
TF gather(const NoisyRealDataset& data, const std::vector<int64_t>& idx, size_t begin,
          size_t end, int64_t row0, int64_t rows) {
  const int64_t batch = static_cast<int64_t>(end - begin);
  std::vector<float> out(static_cast<size_t>(batch * rows * data.dim));
  for (size_t i = begin; i < end; ++i) {
    const auto& frame = data.noisy_frame(idx[i]);
    std::copy(frame.begin() + row0 * data.dim, frame.begin() + (row0 + rows) * data.dim,
              out.begin() + static_cast<int64_t>(i - begin) * rows * data.dim);
  }
  return TF::from_data({batch, rows, data.dim}, std::move(out));
}

// Per-sample weights 1/(B * ||target_j||^2) so that
// sum((pred-target)^2 .* w) is the mean per-sample NMSE of the batch.
TF nmse_weights(const TF& targets) {
  const int64_t batch = targets.dim(0);
  const int64_t block = targets.numel() / batch;
  std::vector<float> w(static_cast<size_t>(batch));
  for (int64_t b = 0; b < batch; ++b) {
    double norm2 = 0;
    for (int64_t j = 0; j < block; ++j) {
      const double v = targets.at(b * block + j);
      norm2 += v * v;
    }
    w[static_cast<size_t>(b)] = norm2 > 0 ? static_cast<float>(1.0 / (norm2 * batch)) : 0.0f;
  }
  return TF::from_data({batch, 1, 1}, std::move(w));
}

double validation_nmse(models::ModelBundle<float>& bundle, const NoisyRealDataset& data,
                       const TrainConfig& cfg) {
  nn::NoGradGuard ng;
  NmseAccumulator acc;
  const auto& idx = data.val_idx;
  const int64_t chunk = std::max<int64_t>(cfg.batch_size, 1);
  for (size_t begin = 0; begin < idx.size(); begin += static_cast<size_t>(chunk)) {
    const size_t end = std::min(idx.size(), begin + static_cast<size_t>(chunk));
    TF known = gather(data, idx, begin, end, 0, cfg.l_train);
    TF preds;
    if (cfg.validate_teacher_forced) {
      TF dec_in = gather(data, idx, begin, end, cfg.l_train - 1, cfg.delta_train);
      preds = bundle.training_forward(known, dec_in);
    } else {
      preds = bundle.predict(known, cfg.delta_train);
    }
    const int64_t block = cfg.delta_train * data.dim;
    for (size_t i = begin; i < end; ++i) {
      const auto& frame = data.noisy_frame(idx[i]);
      std::span<const float> target(frame.data() + cfg.l_train * data.dim,
                                    static_cast<size_t>(block));
      std::span<const float> pred(preds.values().data() + static_cast<int64_t>(i - begin) * block,
                                  static_cast<size_t>(block));
      acc.add(target, pred);
    }
  }
  return acc.value();
}

TrainResult fit_mar(models::ModelBundle<float>& bundle, const NoisyRealDataset& data,
                    const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<float>> sequences;
  sequences.reserve(data.train_idx.size());
  for (int64_t i : data.train_idx) sequences.push_back(data.noisy_frame(i));
  bundle.mar = models::mar_fit(sequences, data.n_slot, data.dim, cfg.l_train);
  TrainResult res;
  res.best_epoch = 0;
  res.best_val_nmse = validation_nmse(bundle, data, cfg);
  res.history.push_back({0, res.best_val_nmse, res.best_val_nmse});
  res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace

std::vector<std::vector<float>> snapshot_params(models::ModelBundle<float>& bundle) {
  std::vector<std::vector<float>> snap;
  for (auto* p : bundle.params()) snap.push_back(p->values());
  return snap;
}

void restore_params(models::ModelBundle<float>& bundle,
                    const std::vector<std::vector<float>>& snapshot) {
  auto params = bundle.params();
  if (params.size() != snapshot.size())
    throw ContractError("restore_params: snapshot does not match parameter list");
  for (size_t i = 0; i < params.size(); ++i) params[i]->mutable_values() = snapshot[i];
}

TrainResult train(models::ModelBundle<float>& bundle, const chan::Dataset& dataset,
                  const TrainConfig& cfg) {
  if (cfg.l_train + cfg.delta_train > dataset.scenario.n_slot)
    throw ContractError("train: l_train + delta_train exceeds n_slot");
  CleanFirewall::Guard firewall;
  NoisyRealDataset data = realify_with_noise(dataset, cfg.snr_db, cfg.seed);

  if (bundle.family == models::ModelFamily::mar) return fit_mar(bundle, data, cfg);

  const auto t0 = std::chrono::steady_clock::now();
  auto params = bundle.params();
  auto adam = nn::AdamState<float>::create(params, static_cast<float>(cfg.lr));
  Rng shuffle_base = Rng(cfg.seed).derive(0x7EA0Full);

  TrainResult res;
  res.best_val_nmse = std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best_snapshot = snapshot_params(bundle);

  std::vector<int64_t> order = data.train_idx;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.fresh_noise_per_epoch && epoch > 0)
      data = realify_with_noise(dataset, cfg.snr_db,
                                derive_noise_seed(cfg.seed, cfg.snr_db) + static_cast<uint64_t>(epoch));
    Rng erng = shuffle_base.derive(static_cast<uint64_t>(epoch));
    erng.shuffle(order);

    double loss_sum = 0.0;
    int64_t sample_count = 0;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      TF known = gather(data, order, begin, end, 0, cfg.l_train);
      TF dec_in = gather(data, order, begin, end, cfg.l_train - 1, cfg.delta_train);
      TF target = gather(data, order, begin, end, cfg.l_train, cfg.delta_train);
      TF weights = nmse_weights(target);

      TF pred = bundle.training_forward(known, dec_in);
      TF diff = nn::sub(pred, target);
      TF loss = nn::sum_all(nn::mul(nn::mul(diff, diff), weights));
      const double loss_v = loss.item();
      if (!std::isfinite(loss_v))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(begin / cfg.batch_size) + " (" +
                            models::family_name(bundle.family) + ")");
      loss.backward();
      nn::adam_step(params, adam);
      for (auto* p : params) p->zero_grad();
      const auto batch_n = static_cast<int64_t>(end - begin);
      loss_sum += loss_v * batch_n;
      sample_count += batch_n;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(sample_count);
    stats.val_nmse = validation_nmse(bundle, data, cfg);
    res.history.push_back(stats);
    if (stats.val_nmse < res.best_val_nmse) {
      res.best_val_nmse = stats.val_nmse;
      res.best_epoch = epoch;
      best_snapshot = snapshot_params(bundle);
    }
  }
  restore_params(bundle, best_snapshot);
  res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace csipred::train
