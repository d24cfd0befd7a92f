#pragma once

#include <filesystem>
#include <vector>

namespace canonlift {

/// Row-major float image, channels fastest.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> pixels;
};

/// Binary P6, 8-bit; values are clamped to [0, 1]. 1-channel images are
/// written as gray.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// "CLIM" raw dump: magic, then u32 H, W, channels, then f32 payload.
void write_clim(const std::filesystem::path& path, const Image& image);
Image read_clim(const std::filesystem::path& path);

}  // namespace canonlift
