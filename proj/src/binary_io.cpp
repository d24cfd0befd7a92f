#include "canonlift/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace canonlift {

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

void ByteWriter::put_string16(std::string_view s) {
  if (s.size() > 0xffff) throw std::invalid_argument("string too long for u16 length prefix");
  put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes_.data()),
            static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return ByteReader(std::move(bytes), path.string());
}

void ByteReader::expect_magic(std::string_view magic) {
  const std::uint64_t at = pos_;
  if (bytes_.size() - pos_ < magic.size() ||
      std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
    throw DataError(source_ + ": bad magic at byte offset " + std::to_string(at) +
                        " (expected \"" + std::string(magic) + "\")",
                    at);
  }
  pos_ += magic.size();
}

std::string ByteReader::get_string16(std::string_view what) {
  const auto n = get<std::uint16_t>(what);
  require(n, what);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::fail(const std::string& message) const {
  throw DataError(source_ + ": " + message + " at byte offset " + std::to_string(pos_), pos_);
}

void ByteReader::require(std::size_t n, std::string_view what) const {
  if (bytes_.size() - pos_ < n) {
    throw DataError(source_ + ": truncated while reading " + std::string(what) +
                        " at byte offset " + std::to_string(pos_),
                    pos_);
  }
}

}  // namespace canonlift
