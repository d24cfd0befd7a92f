#include "canonlift/diff/checkpoint.hpp"

#include "canonlift/binary_io.hpp"

namespace canonlift::diff {

namespace {
constexpr std::uint32_t kVersion = 1;

void encode_into(ByteWriter& w, const ParamStore<float>& params) {
  w.put_magic("CLPM");
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, entry] : params) {
    w.put_string16(name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(entry.value.rank()));
    for (auto d : entry.value.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_array<float>(entry.value.span());
  }
}

ParamStore<float> decode_from(ByteReader& r) {
  r.expect_magic("CLPM");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("parameter count");
  ParamStore<float> store;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string16("parameter name");
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape;
    for (std::uint8_t d = 0; d < rank; ++d) shape.push_back(r.get<std::uint32_t>("dimension"));
    Buffer<float> value(shape);
    r.get_array<float>(value.span(), "parameter payload");
    if (store.contains(name)) r.fail("duplicate parameter " + name);
    store.add(name, std::move(value));
  }
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return store;
}
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& params) {
  ByteWriter w;
  encode_into(w, params);
  return w.bytes();
}

ParamStore<float> decode_checkpoint(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes), "checkpoint");
  return decode_from(r);
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params) {
  ByteWriter w;
  encode_into(w, params);
  w.write_file(path);
}

ParamStore<float> load_checkpoint(const std::filesystem::path& path) {
  ByteReader r = ByteReader::from_file(path);
  return decode_from(r);
}

}  // namespace canonlift::diff
