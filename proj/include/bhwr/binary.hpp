#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bhwr {

// Explicit little-endian encoding, independent of host byte order.
class BinaryWriter {
 public:
  void u8(std::uint8_t x) { buf_.push_back(static_cast<char>(x)); }

  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) {
      buf_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
    }
  }

  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      buf_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
    }
  }

  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }

  void bytes(std::string_view data) { buf_.append(data); }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  BinaryReader(const char* data, std::size_t size) : data_(data), size_(size) {}
  explicit BinaryReader(const std::string& data)
      : BinaryReader(data.data(), data.size()) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(*take(1)); }

  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) {
      x |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return x;
  }

  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) {
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return x;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string bytes(std::size_t n) { return std::string(take(n), n); }

  std::string str() {
    const std::uint32_t n = u32();
    return bytes(n);
  }

  bool exhausted() const { return pos_ == size_; }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const char* take(std::size_t n) {
    if (size_ - pos_ < n) {
      throw std::runtime_error("truncated file: wanted " + std::to_string(n) +
                               " bytes, " + std::to_string(size_ - pos_) +
                               " left");
    }
    const char* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path);
  }
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

// Write via temp file + rename so readers never observe a partial file.
inline void atomic_write_file(const std::string& path, std::string_view data) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open file for writing: " + tmp.string());
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) {
      throw std::runtime_error("short write: " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

}  // namespace bhwr
