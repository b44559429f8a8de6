#include "fedledger/auth/auth.hpp"

#include <sodium.h>

#include <cstring>

#include "json.hpp"

namespace fedledger::auth {

std::string_view to_string(Role role) { return role == Role::Agent ? "Agent" : "Client"; }

std::optional<Role> role_from_string(std::string_view name) {
  if (name == "Client") return Role::Client;
  if (name == "Agent") return Role::Agent;
  return std::nullopt;
}

std::string_view to_string(CheckResult result) {
  switch (result) {
    case CheckResult::Valid: return "Valid";
    case CheckResult::Expired: return "Expired";
    case CheckResult::BadSignature: return "BadSignature";
  }
  return "Unknown";
}

KeyPair key_generate(std::uint64_t seed) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  Encoder enc;
  enc.str("fedledger.keygen").u64(seed);
  const Digest material = sha256(enc.buffer());
  KeyPair kp;
  crypto_sign_seed_keypair(kp.public_key.bytes.data(), kp.secret_key.bytes.data(),
                           material.bytes.data());
  return kp;
}

Signature sign(const SecretKey& sk, std::span<const std::uint8_t> message) {
  const Digest d = sha256(message);
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, d.bytes.data(), d.bytes.size(), sk.bytes.data());
  return sig;
}

bool verify(const PublicKey& pk, std::span<const std::uint8_t> message, const Signature& sig) {
  const Digest d = sha256(message);
  return crypto_sign_verify_detached(sig.data(), d.bytes.data(), d.bytes.size(), pk.bytes.data()) == 0;
}

Bytes SessionToken::signing_bytes() const {
  Encoder enc;
  enc.str("fedledger.token.v1").str(subject_id).u64(issued_at).u64(expires_at).u8(
      static_cast<std::uint8_t>(role));
  return std::move(enc).take();
}

SessionToken token_issue(const Identity& subject, const SecretKey& signer, std::uint64_t now,
                         std::uint64_t ttl) {
  if (ttl == 0) throw AuthError(AuthErrc::ZeroTTL, "token ttl must be positive");
  SessionToken t;
  t.subject_id = subject.id;
  t.issued_at = now;
  t.expires_at = now + ttl;
  t.role = subject.role;
  t.signature = sign(signer, t.signing_bytes());
  return t;
}

CheckResult token_check(const SessionToken& token, const PublicKey& issuer, std::uint64_t now) {
  if (token.expires_at <= token.issued_at) return CheckResult::BadSignature;
  if (!verify(issuer, token.signing_bytes(), token.signature)) return CheckResult::BadSignature;
  return now < token.expires_at ? CheckResult::Valid : CheckResult::Expired;
}

namespace {

std::string b64_json(const nlohmann::json& j) {
  const std::string text = j.dump();
  return base64url_encode(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json json_from_b64(std::string_view part) {
  const Bytes raw = base64url_decode(part);
  return nlohmann::json::parse(raw.begin(), raw.end());
}

}  // namespace

std::string to_jwt(const SessionToken& token) {
  const nlohmann::json header{{"alg", "EdDSA"}, {"typ", "JWT"}};
  const nlohmann::json payload{{"sub", token.subject_id},
                               {"iat", token.issued_at},
                               {"exp", token.expires_at},
                               {"role", std::string(to_string(token.role))}};
  return b64_json(header) + "." + b64_json(payload) + "." + base64url_encode(token.signature);
}

SessionToken from_jwt(std::string_view jwt) {
  const auto d1 = jwt.find('.');
  const auto d2 = d1 == std::string_view::npos ? d1 : jwt.find('.', d1 + 1);
  if (d2 == std::string_view::npos || jwt.find('.', d2 + 1) != std::string_view::npos) {
    throw AuthError(AuthErrc::MalformedToken, "token must have three dot-separated parts");
  }
  try {
    const auto header = json_from_b64(jwt.substr(0, d1));
    if (header.at("typ") != "JWT" || header.at("alg") != "EdDSA") {
      throw AuthError(AuthErrc::MalformedToken, "unsupported token header");
    }
    const auto payload = json_from_b64(jwt.substr(d1 + 1, d2 - d1 - 1));
    SessionToken t;
    t.subject_id = payload.at("sub").get<std::string>();
    t.issued_at = payload.at("iat").get<std::uint64_t>();
    t.expires_at = payload.at("exp").get<std::uint64_t>();
    const auto role = role_from_string(payload.at("role").get<std::string>());
    if (!role) throw AuthError(AuthErrc::MalformedToken, "unknown role claim");
    t.role = *role;
    const Bytes sig = base64url_decode(jwt.substr(d2 + 1));
    if (sig.size() != t.signature.size()) {
      throw AuthError(AuthErrc::MalformedToken, "signature has wrong length");
    }
    std::memcpy(t.signature.data(), sig.data(), sig.size());
    return t;
  } catch (const AuthError&) {
    throw;
  } catch (const std::exception& e) {
    throw AuthError(AuthErrc::MalformedToken, std::string("malformed token: ") + e.what());
  }
}

}  // namespace fedledger::auth
