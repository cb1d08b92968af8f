#include <doctest.h>

#include <gmpxx.h>

#include "pettrace/blindsig.hpp"
#include "pettrace/bytes.hpp"
#include "pettrace/rng.hpp"

using namespace pet;
using namespace pet::blindsig;

TEST_CASE("textbook-size signing round") {
  // n = 3 * 11, e = 3, d = 7 (ed = 21 = 1 mod lcm(2,10)). Small enough to
  // check every intermediate by hand.
  KeyPair kp;
  kp.pub.n = 33;
  kp.pub.e = 3;
  kp.d = 7;

  mpz_class h = 4;
  mpz_class c = 2;
  mpz_class blinded = blind_hashed(h, c, kp.pub);
  CHECK(blinded == 32);  // 2^3 * 4 mod 33

  mpz_class rep = sign_blinded(blinded, kp);
  CHECK(rep == 32);  // 32^7 mod 33

  mpz_class sigma = unblind(rep, c, kp.pub.n);
  CHECK(sigma == 16);  // 32 * inv(2) mod 33

  mpz_class check;
  mpz_powm(check.get_mpz_t(), sigma.get_mpz_t(), kp.pub.e.get_mpz_t(), kp.pub.n.get_mpz_t());
  CHECK(check == h);
}

TEST_CASE("byte conversion round-trips") {
  CHECK(mpz_to_bytes(mpz_class(0)) == Bytes{0});
  CHECK(mpz_from_bytes(Bytes{}) == 0);
  CHECK(mpz_from_bytes(Bytes{0x01, 0x00}) == 256);

  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    Bytes buf(1 + rng.uniform(64));
    rng.fill(buf);
    buf[0] |= 0x01;  // avoid leading zeros, which do not survive the trip
    mpz_class v = mpz_from_bytes(buf);
    CHECK(mpz_from_bytes(mpz_to_bytes(v)) == v);
  }
}

TEST_CASE("generated keys issue verifiable tokens") {
  Rng rng(2024);
  auto kp = generate_keypair(512, rng);
  CHECK(kp.pub.e == 65537);
  CHECK(mpz_sizeinbase(kp.pub.n.get_mpz_t(), 2) == 512);

  auto token = issue_token(kp, rng);
  CHECK(verify_token(token, kp.pub));

  auto tampered = token;
  tampered.sigma += 1;
  CHECK_FALSE(verify_token(tampered, kp.pub));

  auto flipped = token;
  flipped.r[0] ^= 0x80;
  CHECK_FALSE(verify_token(flipped, kp.pub));

  auto oversized = token;
  oversized.sigma = token.sigma + kp.pub.n;  // same residue, out of range
  CHECK_FALSE(verify_token(oversized, kp.pub));
  auto negative = token;
  negative.sigma = token.sigma - kp.pub.n;
  CHECK_FALSE(verify_token(negative, kp.pub));

  Rng rng2(2025);
  auto other = generate_keypair(512, rng2);
  CHECK_FALSE(verify_token(token, other.pub));
}

TEST_CASE("keypair generation rejects tiny moduli") {
  Rng rng(1);
  CHECK_THROWS_AS(generate_keypair(32, rng), std::invalid_argument);
}

TEST_CASE("signing is blind: distinct factors, identical signature") {
  Rng rng(77);
  auto kp = generate_keypair(1024, rng);
  for (int i = 0; i < 100; ++i) {
    std::array<std::uint8_t, 32> r{};
    rng.fill(r);
    mpz_class h = hash_to_modulus(r, kp.pub.n);
    mpz_class c1 = random_blinding_factor(kp.pub.n, rng);
    mpz_class c2 = random_blinding_factor(kp.pub.n, rng);
    REQUIRE(c1 != c2);
    mpz_class b1 = blind_hashed(h, c1, kp.pub);
    mpz_class b2 = blind_hashed(h, c2, kp.pub);
    CHECK(b1 != b2);  // the authority sees unrelated values
    mpz_class s1 = unblind(sign_blinded(b1, kp), c1, kp.pub.n);
    mpz_class s2 = unblind(sign_blinded(b2, kp), c2, kp.pub.n);
    CHECK(s1 == s2);  // but the client recovers the same signature
    CHECK(verify_token(AuthToken{r, s1}, kp.pub));
  }
}

TEST_CASE("hash_to_modulus lands in range and matches across calls") {
  Rng rng(31337);
  auto kp = generate_keypair(256, rng);
  for (int i = 0; i < 100; ++i) {
    std::array<std::uint8_t, 32> r{};
    rng.fill(r);
    mpz_class h = hash_to_modulus(r, kp.pub.n);
    CHECK(h >= 1);
    CHECK(h < kp.pub.n);
    CHECK(hash_to_modulus(r, kp.pub.n) == h);
  }
  // Tiny modulus: reduction must still avoid 0.
  mpz_class small_n = 6;
  for (int i = 0; i < 50; ++i) {
    std::array<std::uint8_t, 32> r{};
    rng.fill(r);
    mpz_class h = hash_to_modulus(r, small_n);
    CHECK(h >= 1);
    CHECK(h < small_n);
  }
}

TEST_CASE("blinding factors are invertible") {
  Rng rng(8);
  auto kp = generate_keypair(256, rng);
  for (int i = 0; i < 100; ++i) {
    mpz_class c = random_blinding_factor(kp.pub.n, rng);
    CHECK(c >= 2);
    CHECK(c < kp.pub.n);
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), c.get_mpz_t(), kp.pub.n.get_mpz_t());
    CHECK(g == 1);
  }
}
