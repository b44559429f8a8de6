#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "fedledger/common/bytes.hpp"

namespace fedledger::auth {

enum class Role : std::uint8_t { Client = 1, Agent = 2 };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

struct PublicKey {
  std::array<std::uint8_t, 32> bytes{};
  auto operator<=>(const PublicKey&) const = default;
};

struct SecretKey {
  std::array<std::uint8_t, 64> bytes{};
};

using Signature = std::array<std::uint8_t, 64>;

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;
};

/// Deterministic Ed25519 keypair derived from `seed`.
KeyPair key_generate(std::uint64_t seed);

/// Signs the SHA-256 digest of `message`.
Signature sign(const SecretKey& sk, std::span<const std::uint8_t> message);
bool verify(const PublicKey& pk, std::span<const std::uint8_t> message, const Signature& sig);

struct Identity {
  std::string id;
  Role role = Role::Client;
  PublicKey public_key;

  auto operator<=>(const Identity&) const = default;
};

struct SessionToken {
  std::string subject_id;
  std::uint64_t issued_at = 0;
  std::uint64_t expires_at = 0;
  Role role = Role::Client;
  Signature signature{};

  /// Canonical encoding of every field except the signature.
  Bytes signing_bytes() const;

  bool operator==(const SessionToken&) const = default;
};

enum class AuthErrc { ZeroTTL, MalformedToken };

class AuthError : public std::runtime_error {
 public:
  AuthError(AuthErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  AuthErrc code() const { return code_; }

 private:
  AuthErrc code_;
};

SessionToken token_issue(const Identity& subject, const SecretKey& signer, std::uint64_t now,
                         std::uint64_t ttl);

enum class CheckResult { Valid, Expired, BadSignature };

std::string_view to_string(CheckResult result);

/// Validity window is half-open: [issued_at, expires_at).
CheckResult token_check(const SessionToken& token, const PublicKey& issuer, std::uint64_t now);

/// base64url(header).base64url(payload).base64url(signature) with header
/// {alg, typ} and payload {sub, iat, exp, role}.
std::string to_jwt(const SessionToken& token);
SessionToken from_jwt(std::string_view jwt);

}  // namespace fedledger::auth
