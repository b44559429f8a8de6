#include <gtest/gtest.h>

#include <random>

#include "fedledger/auth/auth.hpp"

using namespace fedledger;
using namespace fedledger::auth;

namespace {

Bytes bytes_of(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace

// Public key and signature computed with the Python `cryptography` Ed25519
// implementation from the same seed material.
TEST(Keys, MatchIndependentEd25519) {
  const auto kp = key_generate(0);
  EXPECT_EQ(to_hex(kp.public_key.bytes), "8d304d9a5b43dcb017ac870505e607e72f449cf61f0f82592cfcb3a840a5a900");
  const auto sig = sign(kp.secret_key, bytes_of("abc"));
  EXPECT_EQ(to_hex(sig),
            "2ec0aedb391900fbe28f0efe09639ab1a04e87dcd256ac1959a1cca642a64b92"
            "7e99144bb7469a182ac1757c82bc209e1256ad0081696b138e7c7a8283157600");
  EXPECT_TRUE(verify(kp.public_key, bytes_of("abc"), sig));
  EXPECT_FALSE(verify(kp.public_key, bytes_of("abd"), sig));
  EXPECT_FALSE(verify(key_generate(1).public_key, bytes_of("abc"), sig));
}

TEST(Token, HalfOpenValidityWindow) {
  const auto kp = key_generate(3);
  const Identity who{"C0", Role::Client, kp.public_key};
  const auto t = token_issue(who, kp.secret_key, 100, 50);
  EXPECT_EQ(t.issued_at, 100u);
  EXPECT_EQ(t.expires_at, 150u);
  EXPECT_EQ(token_check(t, kp.public_key, 100), CheckResult::Valid);
  EXPECT_EQ(token_check(t, kp.public_key, 149), CheckResult::Valid);
  EXPECT_EQ(token_check(t, kp.public_key, 150), CheckResult::Expired);
  EXPECT_EQ(token_check(t, key_generate(4).public_key, 120), CheckResult::BadSignature);
}

TEST(Token, ZeroTtlRejected) {
  const auto kp = key_generate(3);
  try {
    token_issue({"C0", Role::Client, kp.public_key}, kp.secret_key, 0, 0);
    FAIL();
  } catch (const AuthError& e) {
    EXPECT_EQ(e.code(), AuthErrc::ZeroTTL);
  }
}

TEST(Token, AnyFieldEditBreaksSignature) {
  const auto kp = key_generate(5);
  const auto t = token_issue({"agent", Role::Agent, kp.public_key}, kp.secret_key, 0, 1000);
  auto a = t;
  a.subject_id = "agenT";
  auto b = t;
  b.expires_at += 1;
  auto c = t;
  c.role = Role::Client;
  auto d = t;
  d.issued_at += 1;
  for (const auto& x : {a, b, c, d}) EXPECT_EQ(token_check(x, kp.public_key, 10), CheckResult::BadSignature);
}

TEST(Token, RandomTamperingNeverAccepted) {
  std::mt19937_64 rng(9);
  const auto kp = key_generate(6);
  const auto t = token_issue({"C1", Role::Client, kp.public_key}, kp.secret_key, 0, 1000);
  std::size_t accepted = 0;
  for (int i = 0; i < 10000; ++i) {
    auto x = t;
    switch (rng() % 5) {
      case 0:
        x.signature[rng() % 64] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        break;
      case 1:
        x.subject_id[rng() % x.subject_id.size()] ^= static_cast<char>(1 + rng() % 127);
        break;
      case 2:
        x.expires_at ^= 1ULL << (rng() % 64);
        break;
      case 3:
        x.issued_at ^= 1ULL << (rng() % 64);
        break;
      default:
        x.role = Role::Agent;
    }
    if (token_check(x, kp.public_key, 1) == CheckResult::Valid) ++accepted;
  }
  EXPECT_EQ(accepted, 0u);
}

TEST(Token, ExpiryIsMonotoneAndWindowValid) {
  std::mt19937_64 rng(10);
  const auto kp = key_generate(8);
  for (int i = 0; i < 200; ++i) {
    const auto issued = rng() % 1000;
    const auto ttl = 1 + rng() % 1000;
    const auto t = token_issue({"C0", Role::Client, kp.public_key}, kp.secret_key, issued, ttl);
    const auto inside = issued + rng() % ttl;
    EXPECT_EQ(token_check(t, kp.public_key, inside), CheckResult::Valid);
    const auto n1 = t.expires_at + rng() % 100;
    EXPECT_EQ(token_check(t, kp.public_key, n1), CheckResult::Expired);
    EXPECT_EQ(token_check(t, kp.public_key, n1 + 1 + rng() % 1000), CheckResult::Expired);
  }
}

TEST(Jwt, RoundTripAndShape) {
  const auto kp = key_generate(7);
  const auto t = token_issue({"C2", Role::Client, kp.public_key}, kp.secret_key, 5, 10);
  const auto jwt = to_jwt(t);
  EXPECT_EQ(std::count(jwt.begin(), jwt.end(), '.'), 2);
  EXPECT_EQ(jwt.find('='), std::string::npos);
  const auto back = from_jwt(jwt);
  EXPECT_EQ(back, t);
  EXPECT_EQ(token_check(back, kp.public_key, 6), CheckResult::Valid);
}

TEST(Jwt, MalformedInputs) {
  const auto kp = key_generate(7);
  const auto jwt = to_jwt(token_issue({"C2", Role::Client, kp.public_key}, kp.secret_key, 5, 10));
  for (const std::string bad : {std::string("a.b"), std::string("a.b.c.d"), std::string("..."),
                                jwt.substr(0, jwt.size() - 4), "x" + jwt}) {
    try {
      from_jwt(bad);
      FAIL() << bad;
    } catch (const AuthError& e) {
      EXPECT_EQ(e.code(), AuthErrc::MalformedToken);
    }
  }
}
