#pragma once

#include <filesystem>

#include "tjf/model.hpp"

namespace tjf {

/// Binary checkpoint layout (all integers little-endian):
///   magic "TJF1", version u32,
///   then per parameter: name length u32, UTF-8 name, rank u32,
///   dims (u64 each), payload (f64 each, row-major).
/// The model configuration is echoed to a `<file>.meta` key-value sidecar;
/// loading reads both files.
void save_checkpoint(const std::filesystem::path& file, const ForecastModel& model);
ForecastModel load_checkpoint(const std::filesystem::path& file);

/// Config <-> key-value mapping shared by checkpoints and config files.
void config_to_kv(const ModelConfig& config, class KvFile& kv);
ModelConfig config_from_kv(const class KvFile& kv, const ModelConfig& defaults = {});

}  // namespace tjf
