#pragma once

#include <filesystem>

#include "json.hpp"

#include "tissueseg/model.hpp"

namespace tseg {

/// Binary container: 8-byte magic, u32 version, u64 header length, JSON
/// header (architecture spec, seed, tensor names and sizes, `extra`), then
/// the raw little-endian float32 parameters and buffers in header order.
void save_checkpoint(const Model& model, const std::filesystem::path& path, const nlohmann::json& extra = {});

struct LoadedCheckpoint {
    Model model;
    nlohmann::json extra;
};

/// Throws IoError on unreadable or malformed files.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

} // namespace tseg
