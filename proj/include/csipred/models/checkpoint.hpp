#pragma once

// Versioned binary model container: magic, format version, family tag, a
// JSON config block (dims + provenance), then the parameter tensors in
// declaration order as little-endian float32 with shape headers.

#include <string>

#include <json.hpp>

#include "csipred/models/bundle.hpp"

namespace csipred::models {

nlohmann::json dims_to_json(const ModelDims& dims);
ModelDims dims_from_json(const nlohmann::json& j);

void save_checkpoint(ModelBundle<float>& bundle, const std::string& path,
                     const nlohmann::json& provenance = nlohmann::json::object());
ModelBundle<float> load_checkpoint(const std::string& path,
                                   nlohmann::json* provenance_out = nullptr);

}  // namespace csipred::models
