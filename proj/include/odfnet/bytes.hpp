#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "odfnet/error.hpp"

namespace odfnet {

// Little-endian byte packing, independent of host endianness.
inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

inline void put_f32(std::vector<uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<uint32_t>(v));
}

inline void put_f64(std::vector<uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

// Cursor over a byte buffer that reports the offset of any malformed field.
class ByteReader {
 public:
  ByteReader(std::string path, std::vector<uint8_t> bytes)
      : path_(std::move(path)), bytes_(std::move(bytes)) {}

  size_t offset() const { return offset_; }
  size_t remaining() const { return bytes_.size() - offset_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorKind::Parse,
                path_ + ": offset " + std::to_string(offset_) + ": " + message);
  }

  uint8_t get_u8(const char* what) {
    need(1, what);
    return bytes_[offset_++];
  }

  uint32_t get_u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[offset_ + static_cast<size_t>(i)];
    offset_ += 4;
    return v;
  }

  uint64_t get_u64(const char* what) {
    const uint64_t lo = get_u32(what);
    const uint64_t hi = get_u32(what);
    return lo | (hi << 32);
  }

  float get_f32(const char* what) { return std::bit_cast<float>(get_u32(what)); }
  double get_f64(const char* what) { return std::bit_cast<double>(get_u64(what)); }

  void get_bytes(uint8_t* dst, size_t n, const char* what) {
    need(n, what);
    for (size_t i = 0; i < n; ++i) dst[i] = bytes_[offset_ + i];
    offset_ += n;
  }

  void expect_end() {
    if (remaining() != 0)
      fail(std::to_string(remaining()) + " trailing bytes after payload");
  }

 private:
  void need(size_t n, const char* what) {
    if (remaining() < n)
      fail(std::string("truncated: expected ") + what);
  }

  std::string path_;
  std::vector<uint8_t> bytes_;
  size_t offset_ = 0;
};

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace odfnet
