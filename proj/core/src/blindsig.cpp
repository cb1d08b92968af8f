#include "pettrace/blindsig.hpp"

#include <stdexcept>

#include "pettrace/crypto.hpp"

namespace pet::blindsig {

namespace {

mpz_class random_mpz_bits(unsigned bits, Rng& rng) {
  std::size_t nbytes = (bits + 7) / 8;
  Bytes buf(nbytes);
  rng.fill(buf);
  mpz_class v = mpz_from_bytes(buf);
  // Trim to exactly `bits` and force the top bit so products reach the
  // requested modulus size.
  mpz_class mask = (mpz_class(1) << bits) - 1;
  v &= mask;
  mpz_setbit(v.get_mpz_t(), bits - 1);
  return v;
}

mpz_class next_prime_from(const mpz_class& start) {
  mpz_class p;
  mpz_nextprime(p.get_mpz_t(), start.get_mpz_t());
  return p;
}

}  // namespace

KeyPair generate_keypair(unsigned bits, Rng& rng) {
  if (bits < 64) throw std::invalid_argument("modulus below 64 bits");
  const mpz_class e = 65537;
  for (;;) {
    mpz_class p = next_prime_from(random_mpz_bits(bits / 2, rng));
    mpz_class q = next_prime_from(random_mpz_bits(bits - bits / 2, rng));
    if (p == q) continue;
    mpz_class n = p * q;
    mpz_class phi = (p - 1) * (q - 1);
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), e.get_mpz_t(), phi.get_mpz_t());
    if (g != 1) continue;
    mpz_class d;
    if (mpz_invert(d.get_mpz_t(), e.get_mpz_t(), phi.get_mpz_t()) == 0) continue;
    return KeyPair{{n, e}, d};
  }
}

mpz_class hash_to_modulus(std::span<const std::uint8_t> r, const mpz_class& n) {
  auto digest = crypto::sha256(r);
  mpz_class h = mpz_from_bytes(digest);
  h %= n;
  if (h == 0) h = 1;
  return h;
}

mpz_class random_blinding_factor(const mpz_class& n, Rng& rng) {
  std::size_t nbytes = (mpz_sizeinbase(n.get_mpz_t(), 2) + 7) / 8;
  Bytes buf(nbytes);
  for (;;) {
    rng.fill(buf);
    mpz_class c = mpz_from_bytes(buf);
    c %= n;
    if (c < 2) continue;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), c.get_mpz_t(), n.get_mpz_t());
    if (g == 1) return c;
  }
}

mpz_class blind_hashed(const mpz_class& h, const mpz_class& c, const PublicKey& pub) {
  mpz_class ce;
  mpz_powm(ce.get_mpz_t(), c.get_mpz_t(), pub.e.get_mpz_t(), pub.n.get_mpz_t());
  return mpz_class(ce * h % pub.n);
}

mpz_class sign_blinded(const mpz_class& blinded, const KeyPair& kp) {
  mpz_class rep;
  mpz_powm(rep.get_mpz_t(), blinded.get_mpz_t(), kp.d.get_mpz_t(), kp.pub.n.get_mpz_t());
  return rep;
}

mpz_class unblind(const mpz_class& rep, const mpz_class& c, const mpz_class& n) {
  mpz_class cinv;
  if (mpz_invert(cinv.get_mpz_t(), c.get_mpz_t(), n.get_mpz_t()) == 0) {
    throw std::invalid_argument("blinding factor not invertible");
  }
  return mpz_class(rep * cinv % n);
}

bool verify_token(const AuthToken& token, const PublicKey& pub) {
  if (token.sigma < 0 || token.sigma >= pub.n) return false;
  mpz_class lhs;
  mpz_powm(lhs.get_mpz_t(), token.sigma.get_mpz_t(), pub.e.get_mpz_t(), pub.n.get_mpz_t());
  return lhs == hash_to_modulus(token.r, pub.n);
}

AuthToken issue_token(const KeyPair& authority, Rng& client_rng) {
  AuthToken token;
  token.r = client_rng.bytes32();
  mpz_class c = random_blinding_factor(authority.pub.n, client_rng);
  mpz_class h = hash_to_modulus(token.r, authority.pub.n);
  mpz_class blinded = blind_hashed(h, c, authority.pub);
  mpz_class rep = sign_blinded(blinded, authority);
  token.sigma = unblind(rep, c, authority.pub.n);
  return token;
}

Bytes mpz_to_bytes(const mpz_class& v) {
  if (v < 0) throw std::invalid_argument("negative value");
  if (v == 0) return Bytes{0};
  std::size_t count = 0;
  Bytes out((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8);
  mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  out.resize(count);
  return out;
}

mpz_class mpz_from_bytes(std::span<const std::uint8_t> data) {
  mpz_class v;
  if (!data.empty()) mpz_import(v.get_mpz_t(), data.size(), 1, 1, 1, 0, data.data());
  return v;
}

}  // namespace pet::blindsig
