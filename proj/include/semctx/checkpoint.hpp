#pragma once

#include <filesystem>
#include <string>

#include "semctx/model.hpp"

namespace semctx {

/// Text container (JSON, format "semctx-model", version 1) holding the
/// architecture, every tensor, trainable flags, head label space, the
/// aggregation layer and the hierarchy id. Doubles round-trip exactly.
std::string serialize_model(const Model& model);
Model parse_model(const std::string& text);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace semctx
