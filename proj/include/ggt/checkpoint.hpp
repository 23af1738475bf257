#pragma once

#include <filesystem>
#include <string>

#include "ggt/backbone.hpp"

namespace ggt {

// A checkpoint is a JSON manifest plus a companion binary of concatenated GGT1
// records. The manifest stores the model config and, per parameter, its name,
// shape, byte offset and byte length inside the binary. Values are stored as
// float32, so a round trip is bit-exact for float-representable weights (which
// build_model produces).

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

// Writes `manifest` and the binary next to it (manifest name with ".bin").
template <typename T>
void save_checkpoint(const std::filesystem::path& manifest, const ModelWeights<T>& weights);

template <typename T>
ModelWeights<T> load_checkpoint(const std::filesystem::path& manifest);

} // namespace ggt
