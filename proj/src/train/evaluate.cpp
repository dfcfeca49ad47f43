#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <span>

#include "csipred/nn/ops.hpp"
#include "csipred/train/evaluate.hpp"
#include "csipred/train/nmse.hpp"

namespace csipred::train {

namespace {

using TF = nn::Tensor<float>;

TF gather_noisy(const NoisyRealDataset& data, const std::vector<int64_t>& idx, size_t begin,
                size_t end, int64_t rows) {
  const int64_t batch = static_cast<int64_t>(end - begin);
  std::vector<float> out(static_cast<size_t>(batch * rows * data.dim));
  for (size_t i = begin; i < end; ++i) {
    const auto& frame = data.noisy_frame(idx[i]);
    std::copy(frame.begin(), frame.begin() + rows * data.dim,
              out.begin() + static_cast<int64_t>(i - begin) * rows * data.dim);
  }
  return TF::from_data({batch, rows, data.dim}, std::move(out));
}

bool length_supported(const models::ModelBundle<float>& bundle, int64_t l, int64_t delta) {
  switch (bundle.family) {
    case models::ModelFamily::mlp:
      return l == bundle.dims.mlp.l_train && delta == bundle.dims.mlp.delta_train;
    case models::ModelFamily::mar:
      return bundle.mar && bundle.mar->order == l;
    case models::ModelFamily::transformer_parallel:
      return l >= bundle.dims.transformer.parallel_prefix;
    case models::ModelFamily::seq2seq_attn_r:
    case models::ModelFamily::seq2seq_attn:
      return l <= bundle.dims.seq2seq.l_max;
    default:
      return true;
  }
}

template <typename PredictFn>
ExperimentRecord evaluate_impl(const std::string& model_id, const chan::Dataset& dataset,
                               double snr_db, int64_t l, int64_t delta, uint64_t seed,
                               const std::string& checkpoint, PredictFn&& predict) {
  const auto t0 = std::chrono::steady_clock::now();
  NoisyRealDataset data = realify_with_noise(dataset, snr_db, seed);
  if (l + delta > data.n_slot) throw ContractError("evaluate: l + delta exceeds n_slot");

  nn::NoGradGuard ng;
  NmseAccumulator acc;
  const auto& idx = data.test_idx;
  constexpr size_t kChunk = 200;
  const int64_t block = delta * data.dim;
  for (size_t begin = 0; begin < idx.size(); begin += kChunk) {
    const size_t end = std::min(idx.size(), begin + kChunk);
    TF known = gather_noisy(data, idx, begin, end, l);
    TF preds = predict(known, delta);
    for (size_t i = begin; i < end; ++i) {
      const auto& clean = data.clean_frame(idx[i]);
      std::span<const float> target(clean.data() + l * data.dim, static_cast<size_t>(block));
      std::span<const float> pred(preds.values().data() + static_cast<int64_t>(i - begin) * block,
                                  static_cast<size_t>(block));
      acc.add(target, pred);
    }
  }
  ExperimentRecord rec;
  rec.model_id = model_id;
  rec.snr_db = snr_db;
  rec.l = l;
  rec.delta = delta;
  rec.nmse = acc.value();
  rec.seed = seed;
  rec.checkpoint = checkpoint;
  rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

ExperimentRecord evaluate(models::ModelBundle<float>& bundle, const chan::Dataset& dataset,
                          double snr_db, int64_t l, int64_t delta, uint64_t seed,
                          const std::string& checkpoint) {
  const std::string model_id = models::family_name(bundle.family);
  if (!length_supported(bundle, l, delta)) {
    ExperimentRecord rec;
    rec.model_id = model_id;
    rec.snr_db = snr_db;
    rec.l = l;
    rec.delta = delta;
    rec.nmse = std::numeric_limits<double>::quiet_NaN();
    rec.seed = seed;
    rec.checkpoint = checkpoint;
    rec.supported = false;
    return rec;
  }
  return evaluate_impl(model_id, dataset, snr_db, l, delta, seed, checkpoint,
                       [&](const TF& known, int64_t d) { return bundle.predict(known, d); });
}

nn::Tensor<float> last_value_hold(const nn::Tensor<float>& known, int64_t delta) {
  const int64_t l = known.dim(-2);
  if (l < 1) throw ContractError("last_value_hold: need at least one snapshot");
  TF last = nn::slice(known, -2, l - 1, 1);
  std::vector<TF> rows(static_cast<size_t>(delta), last);
  if (delta == 0) {
    nn::Shape s = known.shape();
    s[s.size() - 2] = 0;
    return TF::zeros(s);
  }
  return delta == 1 ? last : nn::concat(rows, -2);
}

ExperimentRecord evaluate_last_value_hold(const chan::Dataset& dataset, double snr_db,
                                          int64_t l, int64_t delta, uint64_t seed) {
  return evaluate_impl("last-value-hold", dataset, snr_db, l, delta, seed, "",
                       [](const TF& known, int64_t d) { return last_value_hold(known, d); });
}

std::string csv_line(const ExperimentRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%.9g,%lld,%lld,%.9g,%llu,%.3f,%s", r.model_id.c_str(),
                r.snr_db, static_cast<long long>(r.l), static_cast<long long>(r.delta), r.nmse,
                static_cast<unsigned long long>(r.seed), r.runtime_s, r.checkpoint.c_str());
  return buf;
}

void write_csv(const std::string& path, const std::vector<ExperimentRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw TrainingError("write_csv: cannot open '" + path + "'");
  os << kCsvHeader << "\n";
  for (const auto& r : records) os << csv_line(r) << "\n";
}

}  // namespace csipred::train
