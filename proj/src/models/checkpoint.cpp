#include <cstring>
#include <fstream>

#include "csipred/models/checkpoint.hpp"

namespace csipred::models {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'I', 'P', 'C', 'K', 'P', 'T'};
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

void put_f32_block(std::ostream& os, const float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    put_u32(os, bits);
  }
}

void get_f32_block(std::istream& is, float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    const uint32_t bits = get_u32(is);
    std::memcpy(&data[i], &bits, 4);
  }
}

}  // namespace

nlohmann::json dims_to_json(const ModelDims& dims) {
  return nlohmann::json{
      {"input_dim", dims.input_dim},
      {"l_train", dims.l_train},
      {"delta_train", dims.delta_train},
      {"transformer",
       {{"l_enc", dims.transformer.l_enc},
        {"l_dec", dims.transformer.l_dec},
        {"d_model", dims.transformer.d_model},
        {"heads", dims.transformer.heads},
        {"d_attn", dims.transformer.d_attn},
        {"d_mid", dims.transformer.d_mid},
        {"mlp_hidden", dims.transformer.mlp_hidden},
        {"parallel_prefix", dims.transformer.parallel_prefix}}},
      {"seq2seq",
       {{"hidden_dim", dims.seq2seq.hidden_dim},
        {"layers", dims.seq2seq.layers},
        {"l_max", dims.seq2seq.l_max}}},
      {"lstm", {{"hidden_dim", dims.lstm.hidden_dim}, {"layers", dims.lstm.layers}}},
      {"mlp", {{"hidden", dims.mlp.hidden}}},
  };
}

ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims dims;
  dims.input_dim = j.at("input_dim").get<int64_t>();
  dims.l_train = j.at("l_train").get<int64_t>();
  dims.delta_train = j.at("delta_train").get<int64_t>();
  const auto& t = j.at("transformer");
  dims.transformer.l_enc = t.at("l_enc").get<int64_t>();
  dims.transformer.l_dec = t.at("l_dec").get<int64_t>();
  dims.transformer.d_model = t.at("d_model").get<int64_t>();
  dims.transformer.heads = t.at("heads").get<int64_t>();
  dims.transformer.d_attn = t.at("d_attn").get<int64_t>();
  dims.transformer.d_mid = t.at("d_mid").get<int64_t>();
  dims.transformer.mlp_hidden = t.at("mlp_hidden").get<int64_t>();
  dims.transformer.parallel_prefix = t.at("parallel_prefix").get<int64_t>();
  const auto& s = j.at("seq2seq");
  dims.seq2seq.hidden_dim = s.at("hidden_dim").get<int64_t>();
  dims.seq2seq.layers = s.at("layers").get<int64_t>();
  dims.seq2seq.l_max = s.at("l_max").get<int64_t>();
  dims.lstm.hidden_dim = j.at("lstm").at("hidden_dim").get<int64_t>();
  dims.lstm.layers = j.at("lstm").at("layers").get<int64_t>();
  dims.mlp.hidden = j.at("mlp").at("hidden").get<int64_t>();
  dims.sync();
  return dims;
}

void save_checkpoint(ModelBundle<float>& bundle, const std::string& path,
                     const nlohmann::json& provenance) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw TrainingError("save_checkpoint: cannot open '" + path + "'");

  nlohmann::json config{{"family", family_name(bundle.family)},
                        {"dims", dims_to_json(bundle.dims)},
                        {"provenance", provenance}};
  if (bundle.mar)
    config["mar"] = {{"order", bundle.mar->order},
                     {"dim", bundle.mar->dim},
                     {"ridge_used", bundle.mar->ridge_used}};
  const std::string config_str = config.dump();

  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_u32(os, static_cast<uint32_t>(bundle.family));
  put_u64(os, config_str.size());
  os.write(config_str.data(), static_cast<std::streamsize>(config_str.size()));

  if (bundle.mar) {
    put_u64(os, 1);
    const auto shape = bundle.mar->coeff_shape();
    put_u32(os, static_cast<uint32_t>(shape.size()));
    for (int64_t d : shape) put_u64(os, static_cast<uint64_t>(d));
    put_f32_block(os, bundle.mar->coeffs.data(), bundle.mar->coeffs.size());
  } else {
    auto params = bundle.params();
    put_u64(os, params.size());
    for (const auto* p : params) {
      put_u32(os, static_cast<uint32_t>(p->shape().size()));
      for (int64_t d : p->shape()) put_u64(os, static_cast<uint64_t>(d));
      put_f32_block(os, p->values().data(), p->values().size());
    }
  }
  if (!os) throw TrainingError("save_checkpoint: write failed for '" + path + "'");
}

ModelBundle<float> load_checkpoint(const std::string& path, nlohmann::json* provenance_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TrainingError("load_checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw ContractError("load_checkpoint: '" + path + "' is not a checkpoint");
  const uint32_t version = get_u32(is);
  if (version != kVersion)
    throw ContractError("load_checkpoint: unsupported version " + std::to_string(version));
  const auto family = static_cast<ModelFamily>(get_u32(is));
  const uint64_t config_len = get_u64(is);
  std::string config_str(config_len, '\0');
  is.read(config_str.data(), static_cast<std::streamsize>(config_len));
  const nlohmann::json config = nlohmann::json::parse(config_str);
  if (family_from_name(config.at("family").get<std::string>()) != family)
    throw ContractError("load_checkpoint: family tag does not match config block");
  if (provenance_out && config.contains("provenance")) *provenance_out = config.at("provenance");

  ModelBundle<float> bundle =
      ModelBundle<float>::create(family, dims_from_json(config.at("dims")), /*seed=*/0);

  const uint64_t n_tensors = get_u64(is);
  auto read_tensor_into = [&](std::vector<float>& dst, const std::vector<int64_t>& expect_shape) {
    const uint32_t ndim = get_u32(is);
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = static_cast<int64_t>(get_u64(is));
    if (shape != expect_shape)
      throw ContractError("load_checkpoint: tensor shape mismatch in '" + path + "'");
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    dst.resize(static_cast<size_t>(n));
    get_f32_block(is, dst.data(), dst.size());
  };

  if (family == ModelFamily::mar) {
    if (n_tensors != 1) throw ContractError("load_checkpoint: bad AR tensor count");
    const auto& m = config.at("mar");
    MarModel mar;
    mar.order = m.at("order").get<int64_t>();
    mar.dim = m.at("dim").get<int64_t>();
    mar.ridge_used = m.at("ridge_used").get<bool>();
    std::vector<float> coeffs;
    read_tensor_into(coeffs, {mar.order * mar.dim + 1, mar.dim});
    mar.coeffs = std::move(coeffs);
    bundle.mar = std::move(mar);
  } else {
    auto params = bundle.params();
    if (n_tensors != params.size())
      throw ContractError("load_checkpoint: tensor count mismatch in '" + path + "'");
    for (auto* p : params) read_tensor_into(p->mutable_values(), p->shape());
  }
  if (!is) throw TrainingError("load_checkpoint: truncated file '" + path + "'");
  return bundle;
}

}  // namespace csipred::models
