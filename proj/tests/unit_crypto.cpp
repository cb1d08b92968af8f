#include <doctest.h>

#include <cstdint>
#include <string>

#include "pettrace/bytes.hpp"
#include "pettrace/crypto.hpp"
#include "pettrace/rng.hpp"
#include "support/ref_sha256.hpp"
#include "support/vectors.hpp"

using namespace pet;

namespace {

std::array<std::uint8_t, 32> secret_from_u64(std::uint64_t v) {
  std::array<std::uint8_t, 32> s{};
  for (int i = 0; i < 8; ++i) s[31 - i] = static_cast<std::uint8_t>(v >> (8 * i));
  return s;
}

std::uint64_t ebid_low_u32(const crypto::Ebid& e) {
  std::uint64_t v = 0;
  for (int i = 28; i < 32; ++i) v = v << 8 | e[i];
  return v;
}

Bytes str_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

const auto kPetVectors = testsupport::load_vectors(std::string(PETTRACE_TEST_DIR) +
                                                   "/vectors/pet_vectors.txt");

}  // namespace

TEST_CASE("sha256 matches the published test vectors") {
  CHECK(to_hex(crypto::sha256(str_bytes("abc"))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(to_hex(crypto::sha256(str_bytes(""))) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(to_hex(crypto::sha256(str_bytes("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  CHECK(to_hex(crypto::sha256(str_bytes(std::string(1000000, 'a')))) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("reference sha256 oracle matches the same vectors") {
  CHECK(to_hex(testref::sha256(str_bytes("abc"))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(to_hex(testref::sha256(str_bytes(""))) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(to_hex(testref::sha256(str_bytes(std::string(1000000, 'a')))) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("production hash and reference oracle agree on random inputs") {
  Rng rng(0xC0FFEE);
  for (int i = 0; i < 200; ++i) {
    Bytes buf(rng.uniform(300));
    rng.fill(buf);
    CHECK(crypto::sha256(buf) == testref::sha256(buf));
  }
}

TEST_CASE("toy group conformance vectors") {
  for (const char* name : {"toy1", "toy2", "toy3"}) {
    CAPTURE(name);
    const auto& v = kPetVectors.at(name);
    auto group = crypto::GroupParams::toy_mod_p(std::stoull(v.at("p")), std::stoull(v.at("g")));
    auto ida = crypto::identity_from_secret(group, secret_from_u64(std::stoull(v.at("secret_a"))), 0);
    auto idb = crypto::identity_from_secret(group, secret_from_u64(std::stoull(v.at("secret_b"))), 0);
    CHECK(ebid_low_u32(ida.ebid) == std::stoull(v.at("ebid_a")));
    CHECK(ebid_low_u32(idb.ebid) == std::stoull(v.at("ebid_b")));

    auto shared_ab = crypto::dh_shared(group, ida.secret, idb.ebid);
    auto shared_ba = crypto::dh_shared(group, idb.secret, ida.ebid);
    REQUIRE(shared_ab.has_value());
    REQUIRE(shared_ba.has_value());
    CHECK(*shared_ab == *shared_ba);
    CHECK(to_hex(*shared_ab) == v.at("shared"));

    auto [pet1, pet2] = crypto::derive_pet_pair(*shared_ab);
    CHECK(to_hex(pet1.bytes) == v.at("pet1"));
    CHECK(to_hex(pet2.bytes) == v.at("pet2"));

    // Cross-check the token hashes against the independent implementation.
    Bytes tagged = *shared_ab;
    tagged.insert(tagged.begin(), 0x31);
    CHECK(testref::sha256(tagged) == pet1.bytes);
    tagged[0] = 0x32;
    CHECK(testref::sha256(tagged) == pet2.bytes);
  }
}

TEST_CASE("x25519 conformance vector") {
  const auto& v = kPetVectors.at("x25519");
  auto group = crypto::GroupParams::curve25519();
  auto ida = crypto::identity_from_secret(group, array_from_hex<32>(v.at("secret_a")), 0);
  auto idb = crypto::identity_from_secret(group, array_from_hex<32>(v.at("secret_b")), 0);
  CHECK(to_hex(ida.ebid) == v.at("public_a"));
  CHECK(to_hex(idb.ebid) == v.at("public_b"));

  auto shared_ab = crypto::dh_shared(group, ida.secret, idb.ebid);
  auto shared_ba = crypto::dh_shared(group, idb.secret, ida.ebid);
  REQUIRE(shared_ab.has_value());
  REQUIRE(shared_ba.has_value());
  CHECK(*shared_ab == *shared_ba);
  CHECK(to_hex(*shared_ab) == v.at("shared"));

  auto [pet1, pet2] = crypto::derive_pet_pair(*shared_ab);
  CHECK(to_hex(pet1.bytes) == v.at("pet1"));
  CHECK(to_hex(pet2.bytes) == v.at("pet2"));
}

TEST_CASE("token pairs are symmetric and role assignment is complementary") {
  auto group = crypto::GroupParams::curve25519();
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    auto a = crypto::gen_identity(group, rng, i);
    auto b = crypto::gen_identity(group, rng, i);
    auto sa = crypto::dh_shared(group, a.secret, b.ebid);
    auto sb = crypto::dh_shared(group, b.secret, a.ebid);
    REQUIRE(sa.has_value());
    REQUIRE(sb.has_value());
    auto [a1, a2] = crypto::derive_pet_pair(*sa);
    auto [b1, b2] = crypto::derive_pet_pair(*sb);
    CHECK(a1 == b1);
    CHECK(a2 == b2);
    auto ra = crypto::assign_roles(a.ebid, b.ebid, a1, a2);
    auto rb = crypto::assign_roles(b.ebid, a.ebid, b1, b2);
    // What one side will query for is exactly what the other uploads.
    CHECK(ra.request_token == rb.upload_token);
    CHECK(ra.upload_token == rb.request_token);
    CHECK(ra.request_token != ra.upload_token);
  }
}

TEST_CASE("role assignment orientation and failure mode") {
  crypto::Ebid hi{};
  crypto::Ebid lo{};
  hi[0] = 2;
  lo[0] = 1;
  crypto::PetToken p1{secret_from_u64(11)};
  crypto::PetToken p2{secret_from_u64(22)};
  auto roles_hi = crypto::assign_roles(hi, lo, p1, p2);
  CHECK(roles_hi.request_token == p1);
  CHECK(roles_hi.upload_token == p2);
  auto roles_lo = crypto::assign_roles(lo, hi, p1, p2);
  CHECK(roles_lo.request_token == p2);
  CHECK(roles_lo.upload_token == p1);
  CHECK_THROWS_AS(crypto::assign_roles(hi, hi, p1, p2), std::invalid_argument);
}

TEST_CASE("invalid peer identifiers are rejected") {
  auto curve = crypto::GroupParams::curve25519();
  Rng rng(7);
  auto id = crypto::gen_identity(curve, rng, 0);
  crypto::Ebid zero{};
  CHECK_FALSE(crypto::dh_shared(curve, id.secret, zero).has_value());

  auto toy = crypto::GroupParams::toy_mod_p(23, 5);
  auto tid = crypto::identity_from_secret(toy, secret_from_u64(4), 0);
  crypto::Ebid toozero{};
  CHECK_FALSE(crypto::dh_shared(toy, tid.secret, toozero).has_value());
  crypto::Ebid toobig{};
  toobig[31] = 23;  // equals the modulus
  CHECK_FALSE(crypto::dh_shared(toy, tid.secret, toobig).has_value());
  crypto::Ebid highbits{};
  highbits[0] = 1;  // valid low word but non-canonical padding
  highbits[31] = 4;
  CHECK_FALSE(crypto::dh_shared(toy, tid.secret, highbits).has_value());
}

TEST_CASE("toy group parameter validation") {
  CHECK_THROWS_AS(crypto::GroupParams::toy_mod_p(2, 1), std::invalid_argument);
  CHECK_THROWS_AS(crypto::GroupParams::toy_mod_p(0x1'0000'0000ull, 5), std::invalid_argument);
  CHECK_THROWS_AS(crypto::GroupParams::toy_mod_p(23, 1), std::invalid_argument);
  CHECK_THROWS_AS(crypto::GroupParams::toy_mod_p(23, 23), std::invalid_argument);
}

TEST_CASE("token derivation rejects an empty shared secret") {
  CHECK_THROWS_AS(crypto::derive_pet_pair(Bytes{}), std::invalid_argument);
}

TEST_CASE("identity secrets can be erased in place") {
  Rng rng(3);
  auto id = crypto::gen_identity(crypto::GroupParams::curve25519(), rng, 5);
  CHECK(id.secret != std::array<std::uint8_t, 32>{});
  id.erase_secret();
  CHECK(id.secret == std::array<std::uint8_t, 32>{});
  CHECK(id.epoch == 5);
}

TEST_CASE("entry encryption round-trips and authenticates") {
  Rng rng(99);
  auto key = crypto::gen_entry_key(rng);
  Bytes plain = str_bytes("entry payload with some length to it");
  auto ct1 = crypto::encrypt_entry(key, plain, rng);
  auto ct2 = crypto::encrypt_entry(key, plain, rng);
  CHECK(ct1 != ct2);  // fresh nonce every time
  auto back = crypto::decrypt_entry(key, ct1);
  REQUIRE(back.has_value());
  CHECK(*back == plain);

  auto tampered = ct1;
  tampered[tampered.size() / 2] ^= 0x01;
  CHECK_FALSE(crypto::decrypt_entry(key, tampered).has_value());

  auto wrong_key = crypto::gen_entry_key(rng);
  CHECK_FALSE(crypto::decrypt_entry(wrong_key, ct1).has_value());

  CHECK_FALSE(crypto::decrypt_entry(key, Bytes(10)).has_value());  // too short to contain a box
}

TEST_CASE("deterministic generators reproduce identities") {
  auto group = crypto::GroupParams::curve25519();
  Rng r1(1234);
  Rng r2(1234);
  auto a = crypto::gen_identity(group, r1, 9);
  auto b = crypto::gen_identity(group, r2, 9);
  CHECK(a.secret == b.secret);
  CHECK(a.ebid == b.ebid);
  CHECK(a.epoch == 9);
}
