#include "fedledger/common/bytes.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>

namespace fedledger {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> data) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
  return d;
}

Digest sha256(std::string_view data) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw DecodeError("hex string has odd length");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw DecodeError("invalid hex digit");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  }
  return out;
}

Digest Digest::from_hex(std::string_view hex) {
  const Bytes raw = fedledger::from_hex(hex);
  if (raw.size() != 32) throw DecodeError("digest must be 32 bytes");
  Digest d;
  std::memcpy(d.bytes.data(), raw.data(), 32);
  return d;
}

std::string Digest::hex() const { return to_hex(bytes); }

bool Digest::is_zero() const {
  for (auto b : bytes)
    if (b != 0) return false;
  return true;
}

std::string base64url_encode(std::span<const std::uint8_t> data) {
  ensure_sodium();
  constexpr int variant = sodium_base64_VARIANT_URLSAFE_NO_PADDING;
  std::string out(sodium_base64_encoded_len(data.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

Bytes base64url_decode(std::string_view text) {
  ensure_sodium();
  Bytes out(text.size() * 3 / 4 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_URLSAFE_NO_PADDING) != 0 ||
      end != text.data() + text.size()) {
    throw DecodeError("invalid base64url text");
  }
  out.resize(len);
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view domain, std::uint64_t index,
                          std::string_view actor) {
  Encoder enc;
  enc.u64(base).str(domain).u64(index).str(actor);
  const Digest d = sha256(enc.buffer());
  std::uint64_t out = 0;
  for (int i = 7; i >= 0; --i) out = (out << 8) | d.bytes[static_cast<std::size_t>(i)];
  return out;
}

Encoder& Encoder::u8(std::uint8_t v) {
  buf_.push_back(v);
  return *this;
}

Encoder& Encoder::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Encoder& Encoder::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Encoder& Encoder::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

Encoder& Encoder::bytes(std::span<const std::uint8_t> v) {
  u32(static_cast<std::uint32_t>(v.size()));
  return raw(v);
}

Encoder& Encoder::str(std::string_view v) {
  return bytes(std::span(reinterpret_cast<const std::uint8_t*>(v.data()), v.size()));
}

Encoder& Encoder::digest(const Digest& d) { return raw(d.bytes); }

Encoder& Encoder::raw(std::span<const std::uint8_t> v) {
  buf_.insert(buf_.end(), v.begin(), v.end());
  return *this;
}

void Decoder::need(std::size_t n) const {
  if (remaining() < n) throw DecodeError("unexpected end of input");
}

std::uint8_t Decoder::u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t Decoder::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t Decoder::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
  return v;
}

double Decoder::f64() { return std::bit_cast<double>(u64()); }

bool Decoder::boolean() {
  const auto v = u8();
  if (v > 1) throw DecodeError("non-canonical boolean");
  return v == 1;
}

Bytes Decoder::bytes() {
  const auto n = u32();
  auto s = raw(n);
  return Bytes(s.begin(), s.end());
}

std::string Decoder::str() {
  const auto n = u32();
  auto s = raw(n);
  return std::string(s.begin(), s.end());
}

Digest Decoder::digest() {
  auto s = raw(32);
  Digest d;
  std::memcpy(d.bytes.data(), s.data(), 32);
  return d;
}

std::span<const std::uint8_t> Decoder::raw(std::size_t n) {
  need(n);
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

void Decoder::expect_end() const {
  if (!done()) throw DecodeError("trailing bytes after canonical encoding");
}

}  // namespace fedledger
