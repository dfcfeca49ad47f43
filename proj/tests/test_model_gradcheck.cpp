#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "csipred/models/bundle.hpp"
#include "csipred/nn/gradcheck.hpp"
#include "csipred/rng.hpp"

using namespace csipred;
using models::ModelDims;
using models::ModelFamily;
using TD = nn::Tensor<double>;

namespace {

// Tape gradients vs central differences on the teacher-forced training pass,
// 64-bit mode, tiny configs.
double model_gradcheck(ModelFamily fam, uint64_t seed, int probes) {
  ModelDims dims = ModelDims::tiny();
  auto bundle = models::ModelBundle<double>::create(fam, dims, seed);
  Rng rng = Rng(seed).derive(5);
  const int64_t batch = 2;
  std::vector<double> kv(static_cast<size_t>(batch * dims.l_train * dims.input_dim));
  for (auto& v : kv) v = rng.uniform(-1.0, 1.0);
  std::vector<double> dv(static_cast<size_t>(batch * dims.delta_train * dims.input_dim));
  for (auto& v : dv) v = rng.uniform(-1.0, 1.0);
  TD known = TD::from_data({batch, dims.l_train, dims.input_dim}, kv);
  TD dec_in = TD::from_data({batch, dims.delta_train, dims.input_dim}, dv);

  auto loss_fn = [&]() {
    TD out = bundle.training_forward(known, dec_in);
    return nn::mean_all(nn::mul(out, out));
  };
  auto params = bundle.params();
  Rng prng = Rng(seed).derive(7);
  auto report = nn::grad_check<double>(loss_fn, params, probes, prng, 1e-5);
  CHECK(report.probes == probes);
  return report.max_rel_err;
}

}  // namespace

TEST_CASE("transformer-rpe tiny config gradients match finite differences") {
  CHECK(model_gradcheck(ModelFamily::transformer_rpe, 2024, 120) < 1e-4);
}

TEST_CASE("transformer-pe tiny config gradients match finite differences") {
  CHECK(model_gradcheck(ModelFamily::transformer_pe, 2025, 80) < 1e-4);
}

TEST_CASE("transformer-parallel tiny config gradients match finite differences") {
  CHECK(model_gradcheck(ModelFamily::transformer_parallel, 2026, 80) < 1e-4);
}

TEST_CASE("seq2seq-attn-r tiny config gradients match finite differences") {
  CHECK(model_gradcheck(ModelFamily::seq2seq_attn_r, 2027, 120) < 1e-4);
}

TEST_CASE("seq2seq-attn ablation tiny config gradients match finite differences") {
  CHECK(model_gradcheck(ModelFamily::seq2seq_attn, 2028, 80) < 1e-4);
}

TEST_CASE("lstm tiny config gradients match finite differences") {
  CHECK(model_gradcheck(ModelFamily::lstm, 2029, 100) < 1e-4);
}

TEST_CASE("mlp tiny config gradients match finite differences") {
  CHECK(model_gradcheck(ModelFamily::mlp, 2030, 100) < 1e-4);
}
