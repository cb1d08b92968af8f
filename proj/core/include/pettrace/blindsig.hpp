#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <span>

#include "pettrace/bytes.hpp"
#include "pettrace/rng.hpp"

namespace pet::blindsig {

// Chaum-style RSA blind signatures. The authority signs a blinded hash of a
// client nonce R without learning R; anyone can later verify (R, sigma)
// against the public key. One key pair per token class, so a token proves
// the class it was issued for and nothing about the requesting client.

struct PublicKey {
  mpz_class n;
  mpz_class e;

  bool operator==(const PublicKey&) const = default;
};

struct KeyPair {
  PublicKey pub;
  mpz_class d;
};

struct AuthToken {
  std::array<std::uint8_t, 32> r{};
  mpz_class sigma;

  bool operator==(const AuthToken&) const = default;
};

// Probable-prime RSA key, e = 65537. bits is the modulus size and must be
// at least 64 (toy sizes are allowed for tests, real configs use >= 1024).
KeyPair generate_keypair(unsigned bits, Rng& rng);

// H(R) reduced into Z_n*: SHA-256 of R, interpreted big-endian, reduced
// mod n, mapped away from 0.
mpz_class hash_to_modulus(std::span<const std::uint8_t> r, const mpz_class& n);

// Blinding factor c drawn uniformly from [2, n) with gcd(c, n) = 1.
mpz_class random_blinding_factor(const mpz_class& n, Rng& rng);

// Client side: blinded = c^e * h mod n for an already reduced h.
mpz_class blind_hashed(const mpz_class& h, const mpz_class& c, const PublicKey& pub);

// Authority side: rep = blinded^d mod n. The authority never sees R or sigma.
mpz_class sign_blinded(const mpz_class& blinded, const KeyPair& kp);

// Client side: sigma = rep * c^-1 mod n.
mpz_class unblind(const mpz_class& rep, const mpz_class& c, const mpz_class& n);

// sigma^e mod n == H(R) mod n.
bool verify_token(const AuthToken& token, const PublicKey& pub);

// Full issuance round against a locally held authority key: draw R and c,
// blind, sign, unblind. Used by honest clients in the simulation.
AuthToken issue_token(const KeyPair& authority, Rng& client_rng);

Bytes mpz_to_bytes(const mpz_class& v);
mpz_class mpz_from_bytes(std::span<const std::uint8_t> data);

}  // namespace pet::blindsig
