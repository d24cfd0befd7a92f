#include "canonlift/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "canonlift/binary_io.hpp"

namespace canonlift {

namespace {
void check_image(const Image& image) {
  if (image.height < 1 || image.width < 1 || (image.channels != 1 && image.channels != 3) ||
      image.pixels.size() != static_cast<std::size_t>(image.height) * image.width * image.channels) {
    throw std::invalid_argument("image has inconsistent dimensions");
  }
}
}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& image) {
  check_image(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  std::vector<std::uint8_t> bytes(3 * n);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) {
      const float v = image.pixels[p * image.channels + (image.channels == 3 ? c : 0)];
      bytes[3 * p + c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  int maxval = 0;
  Image image;
  in >> magic >> image.width >> image.height >> maxval;
  in.get();
  if (magic != "P6" || maxval != 255 || image.width < 1 || image.height < 1) {
    throw DataError(path.string() + ": not an 8-bit P6 image");
  }
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  std::vector<std::uint8_t> bytes(3 * n);
  const auto header = static_cast<std::uint64_t>(in.tellg());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DataError(path.string() + ": truncated pixel data", header + in.gcount());
  }
  image.pixels.resize(3 * n);
  for (std::size_t i = 0; i < 3 * n; ++i) image.pixels[i] = bytes[i] / 255.0f;
  return image;
}

void write_clim(const std::filesystem::path& path, const Image& image) {
  check_image(image);
  ByteWriter w;
  w.put_magic("CLIM");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(image.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(image.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(image.channels));
  w.put_array<float>(image.pixels);
  w.write_file(path);
}

Image read_clim(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("CLIM");
  Image image;
  image.height = static_cast<int>(r.get<std::uint32_t>("height"));
  image.width = static_cast<int>(r.get<std::uint32_t>("width"));
  image.channels = static_cast<int>(r.get<std::uint32_t>("channels"));
  if (image.height < 1 || image.width < 1 || image.channels < 1) r.fail("invalid image dimensions");
  image.pixels.resize(static_cast<std::size_t>(image.height) * image.width * image.channels);
  r.get_array<float>(std::span<float>(image.pixels), "pixels");
  if (!r.at_end()) r.fail("trailing bytes after image payload");
  return image;
}

}  // namespace canonlift
