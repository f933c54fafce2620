#pragma once

// "ISFM" checkpoints: magic, u32 version, u32 JSON length, JSON ModelSpec,
// u32 parameter count, then per parameter u32 name length, name, u32 rank,
// u64 extents, float64 data (all little-endian).

#include "isfno/model.hpp"

#include <filesystem>

namespace isfno {

void save_checkpoint(const Model &model, const std::filesystem::path &path);
/// Throws FormatError when the stored parameters do not match the stored spec.
Model load_checkpoint(const std::filesystem::path &path);
/// Loads parameters into `model`; throws FormatError unless the specs agree.
void load_parameters(Model &model, const std::filesystem::path &path);
nlohmann::json read_checkpoint_header(const std::filesystem::path &path);

} // namespace isfno
