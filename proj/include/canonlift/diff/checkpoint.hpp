#pragma once

#include <filesystem>
#include <vector>

#include "canonlift/diff/buffer.hpp"

namespace canonlift::diff {

/// "CLPM" parameter checkpoint: magic, version u32, count u32, then per
/// parameter a u16-prefixed name, u8 rank, u32 dims and an f32 payload.
std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& params);
ParamStore<float> decode_checkpoint(std::vector<std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params);
ParamStore<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace canonlift::diff
