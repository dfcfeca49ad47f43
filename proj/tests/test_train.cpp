#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "csipred/models/checkpoint.hpp"
#include "csipred/train/evaluate.hpp"
#include "csipred/train/nmse.hpp"
#include "csipred/train/sweep.hpp"
#include "csipred/train/trainer.hpp"

using namespace csipred;
using models::ModelDims;
using models::ModelFamily;
using TF = nn::Tensor<float>;

namespace {

chan::ScenarioConfig tiny_scenario() {
  chan::ScenarioConfig cfg;
  cfg.antennas_v = 2;
  cfg.antennas_h = 2;
  cfg.n_slot = 10;
  cfg.paths = 5;
  return cfg;
}

// Model dims matched to the tiny scenario (2M = 8).
ModelDims tiny_dims() {
  ModelDims d;
  d.input_dim = 8;
  d.l_train = 6;
  d.delta_train = 2;
  d.transformer.l_enc = 1;
  d.transformer.l_dec = 1;
  d.transformer.d_model = 16;
  d.transformer.heads = 2;
  d.transformer.d_attn = 8;
  d.transformer.d_mid = 8;
  d.transformer.mlp_hidden = 32;
  d.transformer.parallel_prefix = 4;
  d.seq2seq.hidden_dim = 16;
  d.seq2seq.l_max = 8;
  d.lstm.hidden_dim = 16;
  d.mlp.hidden = 32;
  d.sync();
  return d;
}

train::TrainConfig tiny_train_cfg(int64_t epochs) {
  train::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.l_train = 6;
  cfg.delta_train = 2;
  cfg.snr_db = 20.0;
  cfg.seed = 11;
  return cfg;
}

const chan::Dataset& tiny_dataset() {
  static chan::Dataset ds = chan::generate_dataset(tiny_scenario(), 120, 2501);
  return ds;
}

}  // namespace

TEST_CASE("nmse edge cases and hand examples") {
  std::vector<float> h = {1, 0, 0, 1};
  std::vector<float> same = h;
  CHECK(train::nmse(h, same) == 0.0);
  std::vector<float> zero(4, 0.0f);
  CHECK(train::nmse(h, zero) == 1.0);

  std::vector<float> hhat = {0, 0, 0, 1};
  CHECK(train::nmse(h, hhat) == doctest::Approx(0.5).epsilon(1e-12));

  // scale invariance under joint scaling
  std::vector<float> h2 = {2, 0, 0, 2};
  std::vector<float> hhat2 = {0, 0, 0, 2};
  CHECK(train::nmse(h2, hhat2) == doctest::Approx(train::nmse(h, hhat)).epsilon(1e-7));

  // zero-norm reference samples are excluded with a counter
  train::NmseAccumulator acc;
  acc.add(zero, h);
  CHECK(acc.skipped == 1);
  acc.add(h, hhat);
  CHECK(acc.count == 1);
  CHECK(acc.value() == doctest::Approx(0.5));
}

TEST_CASE("clean firewall blocks clean reads during guarded sections") {
  auto data = train::realify_with_noise(tiny_dataset(), 20.0, 3);
  (void)data.clean_frame(0);  // allowed outside
  {
    train::CleanFirewall::Guard guard;
    CHECK_THROWS_AS(data.clean_frame(0), ContractError);
    CHECK(train::CleanFirewall::engaged());
  }
  CHECK_FALSE(train::CleanFirewall::engaged());
}

TEST_CASE("same seed and SNR give identical noisy data; different seeds differ") {
  auto a = train::realify_with_noise(tiny_dataset(), 10.0, 5);
  auto b = train::realify_with_noise(tiny_dataset(), 10.0, 5);
  CHECK(a.noisy_frame(0) == b.noisy_frame(0));
  auto c = train::realify_with_noise(tiny_dataset(), 10.0, 6);
  CHECK(a.noisy_frame(0) != c.noisy_frame(0));
}

TEST_CASE("one-epoch training is deterministic across reruns") {
  auto run = [&]() {
    auto bundle = models::ModelBundle<float>::create(ModelFamily::transformer_rpe, tiny_dims(), 17);
    auto res = train::train(bundle, tiny_dataset(), tiny_train_cfg(1));
    return res;
  };
  auto r1 = run();
  auto r2 = run();
  REQUIRE(r1.history.size() == 1);
  CHECK(r1.history[0].train_loss == r2.history[0].train_loss);
  CHECK(r1.history[0].val_nmse == r2.history[0].val_nmse);
}

TEST_CASE("desk-scale smoke: every gradient family reduces training loss") {
  for (auto fam : {ModelFamily::transformer_rpe, ModelFamily::transformer_pe,
                   ModelFamily::transformer_parallel, ModelFamily::seq2seq_attn_r,
                   ModelFamily::seq2seq_attn, ModelFamily::lstm, ModelFamily::mlp}) {
    CAPTURE(models::family_name(fam));
    auto bundle = models::ModelBundle<float>::create(fam, tiny_dims(), 23);
    auto res = train::train(bundle, tiny_dataset(), tiny_train_cfg(8));
    REQUIRE(res.history.size() == 8);
    CHECK(res.history.back().train_loss < res.history.front().train_loss);
  }
}

TEST_CASE("best checkpoint is the argmin of validation NMSE") {
  auto bundle = models::ModelBundle<float>::create(ModelFamily::lstm, tiny_dims(), 29);
  auto res = train::train(bundle, tiny_dataset(), tiny_train_cfg(6));
  double best = res.history.front().val_nmse;
  int64_t best_epoch = 0;
  for (const auto& e : res.history)
    if (e.val_nmse < best) {
      best = e.val_nmse;
      best_epoch = e.epoch;
    }
  CHECK(res.best_epoch == best_epoch);
  CHECK(res.best_val_nmse == best);
  CHECK(res.best_val_nmse <= res.history.back().val_nmse);
}

TEST_CASE("mar training fits by least squares and evaluates") {
  auto bundle = models::ModelBundle<float>::create(ModelFamily::mar, tiny_dims(), 31);
  auto cfg = tiny_train_cfg(1);
  auto res = train::train(bundle, tiny_dataset(), cfg);
  REQUIRE(bundle.mar.has_value());
  CHECK(bundle.mar->order == cfg.l_train);
  CHECK(res.history.size() == 1);
  auto rec = train::evaluate(bundle, tiny_dataset(), cfg.snr_db, cfg.l_train, cfg.delta_train, 31);
  CHECK(rec.supported);
  CHECK(std::isfinite(rec.nmse));
  // order is tied to l: other lengths are flagged unsupported
  auto off = train::evaluate(bundle, tiny_dataset(), cfg.snr_db, 4, 2, 31);
  CHECK_FALSE(off.supported);
  CHECK(std::isnan(off.nmse));
}

TEST_CASE("training improves over an untrained model at 20 dB") {
  auto cfg = tiny_train_cfg(12);
  auto untrained = models::ModelBundle<float>::create(ModelFamily::transformer_rpe, tiny_dims(), 37);
  auto trained = models::ModelBundle<float>::create(ModelFamily::transformer_rpe, tiny_dims(), 37);
  train::train(trained, tiny_dataset(), cfg);
  auto r0 = train::evaluate(untrained, tiny_dataset(), 20.0, 6, 2, cfg.seed);
  auto r1 = train::evaluate(trained, tiny_dataset(), 20.0, 6, 2, cfg.seed);
  CHECK(r1.nmse < r0.nmse);
}

TEST_CASE("oracle upper bound: clean targets as predictions give zero NMSE") {
  auto data = train::realify_with_noise(tiny_dataset(), 20.0, 3);
  train::NmseAccumulator acc;
  for (int64_t i : data.test_idx) {
    const auto& clean = data.clean_frame(i);
    std::span<const float> tail(clean.data() + 6 * data.dim, static_cast<size_t>(2 * data.dim));
    acc.add(tail, tail);
  }
  CHECK(acc.value() == 0.0);
}

TEST_CASE("last_value_hold semantics and Doppler sensitivity") {
  std::vector<float> v(2 * 3, 0.0f);
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  TF known = TF::from_data({1, 2, 3}, v);
  TF held = train::last_value_hold(known, 3);
  CHECK(held.shape() == nn::Shape{1, 3, 3});
  for (int64_t t = 0; t < 3; ++t)
    for (int64_t j = 0; j < 3; ++j) CHECK(held.at(t * 3 + j) == v[size_t(3 + j)]);

  // static channel with zero noise: NMSE is exactly zero
  chan::ScenarioConfig cfg = tiny_scenario();
  Rng rng(41);
  auto frame = chan::normalize_pathgain(chan::generate_frame(cfg, 0.0, rng));
  auto seq = chan::to_real(frame);
  train::NmseAccumulator acc;
  std::span<const float> last(seq.row(5), static_cast<size_t>(seq.dim));
  std::span<const float> target(seq.row(6), static_cast<size_t>(seq.dim));
  acc.add(target, last);
  CHECK(acc.value() == 0.0);

  // fast users decorrelate: LVH degrades with velocity
  auto make_ds = [&](double mps, uint64_t seed) {
    chan::Dataset ds;
    ds.scenario = cfg;
    ds.seed = seed;
    Rng base(seed);
    for (int i = 0; i < 60; ++i) {
      Rng fr = base.derive(static_cast<uint64_t>(i));
      ds.frames.push_back(chan::normalize_pathgain(chan::generate_frame(cfg, mps, fr)));
      ds.split.push_back(static_cast<uint8_t>(chan::Split::test));
    }
    return ds;
  };
  auto slow = make_ds(3.0 / 3.6, 51);
  auto fast = make_ds(120.0 / 3.6, 52);
  auto r_slow = train::evaluate_last_value_hold(slow, 20.0, 6, 2, 1);
  auto r_fast = train::evaluate_last_value_hold(fast, 20.0, 6, 2, 1);
  CHECK(r_fast.nmse > r_slow.nmse);
}

TEST_CASE("checkpoint round-trip preserves predictions bitwise") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "csipred_test_ckpt";
  fs::create_directories(dir);

  auto bundle = models::ModelBundle<float>::create(ModelFamily::seq2seq_attn_r, tiny_dims(), 43);
  train::train(bundle, tiny_dataset(), tiny_train_cfg(2));
  const std::string path = (dir / "model.ckpt").string();
  models::save_checkpoint(bundle, path, {{"note", "test"}});

  nlohmann::json prov;
  auto loaded = models::load_checkpoint(path, &prov);
  CHECK(prov.at("note") == "test");
  CHECK(loaded.family == ModelFamily::seq2seq_attn_r);

  auto data = train::realify_with_noise(tiny_dataset(), 20.0, 11);
  std::vector<float> kv(static_cast<size_t>(6 * data.dim));
  std::copy(data.noisy_frame(0).begin(), data.noisy_frame(0).begin() + 6 * data.dim, kv.begin());
  TF known = TF::from_data({1, 6, data.dim}, kv);
  nn::NoGradGuard ng;
  CHECK(bundle.predict(known, 2).values() == loaded.predict(known, 2).values());

  // AR checkpoints round-trip through the same container
  auto mar = models::ModelBundle<float>::create(ModelFamily::mar, tiny_dims(), 47);
  train::train(mar, tiny_dataset(), tiny_train_cfg(1));
  const std::string mar_path = (dir / "mar.ckpt").string();
  models::save_checkpoint(mar, mar_path);
  auto mar2 = models::load_checkpoint(mar_path);
  REQUIRE(mar2.mar.has_value());
  CHECK(mar2.mar->order == mar.mar->order);
  CHECK(mar2.predict(known, 2).values() == mar.predict(known, 2).values());
}

TEST_CASE("csv schema and determinism of record lines") {
  CHECK(std::string(train::kCsvHeader) == "model,snr_db,l,delta,nmse,seed,runtime_s,checkpoint");
  train::ExperimentRecord r;
  r.model_id = "lstm";
  r.snr_db = 20.0;
  r.l = 16;
  r.delta = 4;
  r.nmse = 0.0523437411;
  r.seed = 3;
  r.runtime_s = 1.25;
  r.checkpoint = "out/lstm.ckpt";
  CHECK(train::csv_line(r) == "lstm,20,16,4,0.0523437411,3,1.250,out/lstm.ckpt");
}

TEST_CASE("sweep produces one record per cell and continues on unsupported lengths") {
  train::SweepConfig cfg;
  cfg.model_ids = {"mlp", "lstm"};
  cfg.snr_grid = {20.0};
  cfg.lengths = {{6, 2}, {4, 2}};
  cfg.seeds = {1};
  cfg.train_cfg = tiny_train_cfg(1);
  cfg.dims = tiny_dims();
  cfg.include_lvh = true;
  auto result = train::sweep(tiny_dataset(), cfg);
  CHECK(result.failures.empty());
  // 2 models x 2 lengths + 2 LVH rows
  CHECK(result.records.size() == 6);
  int unsupported = 0;
  for (const auto& r : result.records)
    if (!r.supported) ++unsupported;
  CHECK(unsupported == 1);  // mlp at (4,2)

  auto result2 = train::sweep(tiny_dataset(), cfg);
  for (size_t i = 0; i < result.records.size(); ++i) {
    if (!result.records[i].supported) continue;
    CHECK(result.records[i].nmse == result2.records[i].nmse);
  }
}
