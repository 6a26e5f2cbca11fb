#pragma once

// Little-endian binary stream helpers shared by the on-disk containers.
// Private to the library sources; the readers track a byte offset so that
// format errors can point at the exact spot.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "pldlab/errors.hpp"

namespace pldlab {
namespace binio {

class Writer {
 public:
  explicit Writer(const std::string& path) : f_(path, std::ios::binary) {
    if (!f_) throw DataError("cannot open '" + path + "' for writing");
  }
  void bytes(const void* p, std::size_t n) {
    f_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) {
    std::uint8_t b[2] = {std::uint8_t(v & 0xFF), std::uint8_t(v >> 8)};
    bytes(b, 2);
  }
  void u32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = std::uint8_t((v >> (8 * i)) & 0xFF);
    bytes(b, 4);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  bool good() const { return f_.good(); }

 private:
  std::ofstream f_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : f_(path, std::ios::binary) {
    if (!f_) throw DataError("cannot open '" + path + "' for reading");
  }
  void bytes(void* p, std::size_t n) {
    f_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(f_.gcount()) != n)
      throw FormatError("unexpected end of file",
                        off_ + static_cast<std::uint64_t>(f_.gcount()));
    off_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint16_t u16() {
    std::uint8_t b[2];
    bytes(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::uint64_t offset() const { return off_; }
  bool at_eof() {
    f_.peek();
    return f_.eof();
  }

 private:
  std::ifstream f_;
  std::uint64_t off_ = 0;
};

}  // namespace binio
}  // namespace pldlab
