#pragma once

// Little-endian primitive encoding shared by the EVT1 / EVGR / EVAF / EVP1 formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "evaflow/error.hpp"

namespace evaflow::detail {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

inline std::vector<char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    std::array<char, sizeof(T)> raw{};
    std::memcpy(raw.data(), &value, sizeof(T));
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void put_magic(const char (&magic)[5]) { put_bytes(magic, 4); }

  const std::vector<char>& bytes() const { return bytes_; }
  void reserve(std::size_t n) { bytes_.reserve(n); }

  void write_to(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw io_error("write failed for '" + path + "'");
  }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::vector<char> bytes, std::string origin)
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  static ByteReader from_file(const std::string& path) { return ByteReader(read_file_bytes(path), path); }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get(const char* field) {
    need(sizeof(T), field);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void get_bytes(void* dst, std::size_t n, const char* field) {
    need(n, field);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  void expect_magic(const char (&magic)[5]) {
    char got[4];
    get_bytes(got, 4, "magic");
    if (std::memcmp(got, magic, 4) != 0)
      throw format_error(origin_ + ": bad magic, expected '" + std::string(magic, 4) + "'");
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& origin() const { return origin_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n)
      throw format_error(origin_ + ": truncated while reading " + field);
  }

  std::vector<char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace evaflow::detail
