#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pet {

using Bytes = std::vector<std::uint8_t>;

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(const std::string& hex);  // throws std::invalid_argument on bad input

template <std::size_t N>
std::array<std::uint8_t, N> array_from_hex(const std::string& hex) {
  Bytes b = from_hex(hex);
  if (b.size() != N) throw std::invalid_argument("hex string has wrong length");
  std::array<std::uint8_t, N> out{};
  std::memcpy(out.data(), b.data(), N);
  return out;
}

// Big-endian append-only encoder used by every serialized structure in the
// project. Length prefixes: u16 for byte strings, u32 for element counts.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void raw(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }
  void blob(std::span<const std::uint8_t> data) {
    if (data.size() > 0xFFFF) throw std::length_error("blob too large for u16 prefix");
    u16(static_cast<std::uint16_t>(data.size()));
    raw(data);
  }
  void count(std::size_t n) {
    if (n > 0xFFFFFFFFu) throw std::length_error("count exceeds u32");
    u32(static_cast<std::uint32_t>(n));
  }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

// Thrown on truncated or malformed input; strict decoders catch it and map
// the failure to their own error channel.
struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | b[i];
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | b[i];
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  Bytes blob() {
    std::size_t n = u16();
    auto b = take(n);
    return Bytes(b.begin(), b.end());
  }
  std::size_t count() { return u32(); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > in_.size() - pos_) throw DecodeError("input truncated");
    auto out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    auto b = take(N);
    std::array<std::uint8_t, N> out{};
    std::memcpy(out.data(), b.data(), N);
    return out;
  }
  bool done() const { return pos_ == in_.size(); }
  void expect_done() const {
    if (!done()) throw DecodeError("trailing bytes after message");
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace pet
