#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedledger {

using Bytes = std::vector<std::uint8_t>;

/// 256-bit SHA-256 digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  static Digest zero() { return {}; }
  static Digest from_hex(std::string_view hex);

  std::string hex() const;
  bool is_zero() const;

  auto operator<=>(const Digest&) const = default;
};

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(std::string_view hex);

std::string base64url_encode(std::span<const std::uint8_t> data);
Bytes base64url_decode(std::string_view text);

/// Derives an independent 64-bit seed from a base seed and a tag tuple.
/// Used for every per-(epoch, client) RNG stream so that training and
/// retraining draw identical streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view domain,
                          std::uint64_t index, std::string_view actor = {});

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Canonical little-endian, fixed field order binary writer.
class Encoder {
 public:
  Encoder& u8(std::uint8_t v);
  Encoder& u32(std::uint32_t v);
  Encoder& u64(std::uint64_t v);
  Encoder& f64(double v);
  Encoder& boolean(bool v) { return u8(v ? 1 : 0); }
  /// u32 length prefix followed by raw bytes.
  Encoder& bytes(std::span<const std::uint8_t> v);
  Encoder& str(std::string_view v);
  Encoder& digest(const Digest& d);
  Encoder& raw(std::span<const std::uint8_t> v);

  const Bytes& buffer() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  Bytes buf_;
};

class Decoder {
 public:
  explicit Decoder(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  bool boolean();
  Bytes bytes();
  std::string str();
  Digest digest();
  std::span<const std::uint8_t> raw(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  /// Throws unless every byte was consumed.
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace fedledger
