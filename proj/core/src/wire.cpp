#include "pettrace/wire.hpp"

namespace pet::wire {

namespace {

void put_auth(ByteWriter& w, const AuthTokenWire& a) {
  w.raw(a.r);
  w.blob(a.sigma);
}

AuthTokenWire get_auth(ByteReader& r) {
  AuthTokenWire a;
  a.r = r.fixed<32>();
  a.sigma = r.blob();
  return a;
}

void put_tokens(ByteWriter& w, const std::vector<crypto::PetToken>& tokens) {
  w.count(tokens.size());
  for (const auto& t : tokens) w.raw(t.bytes);
}

std::vector<crypto::PetToken> get_tokens(ByteReader& r) {
  std::size_t n = r.count();
  // Cap well above any honest request size so a hostile count cannot force
  // a huge allocation before the read fails.
  if (n > 1u << 20) throw DecodeError("token list too large");
  std::vector<crypto::PetToken> out(n);
  for (auto& t : out) t.bytes = r.fixed<32>();
  return out;
}

Status get_status(ByteReader& r) {
  std::uint8_t v = r.u8();
  if (v > static_cast<std::uint8_t>(Status::AuthFailure)) throw DecodeError("bad status byte");
  return static_cast<Status>(v);
}

}  // namespace

AuthTokenWire AuthTokenWire::from(const blindsig::AuthToken& t) {
  return {t.r, blindsig::mpz_to_bytes(t.sigma)};
}

blindsig::AuthToken AuthTokenWire::to_token() const {
  return {r, blindsig::mpz_from_bytes(sigma)};
}

Kind kind_of(const Message& m) {
  return std::visit(
      [](const auto& v) -> Kind {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Register>) return Kind::Register;
        else if constexpr (std::is_same_v<T, RegisterOk>) return Kind::RegisterOk;
        else if constexpr (std::is_same_v<T, Upload>) return Kind::Upload;
        else if constexpr (std::is_same_v<T, UploadAck>) return Kind::UploadAck;
        else if constexpr (std::is_same_v<T, EsrReq>) return Kind::EsrReq;
        else if constexpr (std::is_same_v<T, EsrRep>) return Kind::EsrRep;
        else if constexpr (std::is_same_v<T, TestResult>) return Kind::TestResult;
        else if constexpr (std::is_same_v<T, StatelessEsr>) return Kind::StatelessEsr;
        else return Kind::StatelessRep;
      },
      m);
}

Bytes encode(const Message& m) {
  ByteWriter w;
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(kind_of(m)));
  std::visit(
      [&w](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Register>) {
          put_auth(w, v.auth);
        } else if constexpr (std::is_same_v<T, RegisterOk>) {
          w.u8(static_cast<std::uint8_t>(v.status));
          w.u64(v.id);
          w.raw(v.ek);
        } else if constexpr (std::is_same_v<T, Upload>) {
          w.raw(v.token.bytes);
          w.u32(v.day);
          w.u32(v.duration_sec);
          put_auth(w, v.auth);
        } else if constexpr (std::is_same_v<T, UploadAck>) {
          w.u8(static_cast<std::uint8_t>(v.status));
        } else if constexpr (std::is_same_v<T, EsrReq>) {
          w.u64(v.id);
          w.raw(v.ek);
          put_tokens(w, v.tokens);
        } else if constexpr (std::is_same_v<T, EsrRep>) {
          w.u8(static_cast<std::uint8_t>(v.status));
        } else if constexpr (std::is_same_v<T, TestResult>) {
          w.u64(v.id);
          w.raw(v.ek);
          w.u8(v.positive);
          put_auth(w, v.auth);
        } else if constexpr (std::is_same_v<T, StatelessEsr>) {
          w.u32(v.day);
          put_auth(w, v.auth);
          put_tokens(w, v.tokens);
        } else {
          w.u8(static_cast<std::uint8_t>(v.status));
          w.u64(v.score);
        }
      },
      m);
  return w.take();
}

std::optional<Message> decode(std::span<const std::uint8_t> data) {
  try {
    ByteReader r(data);
    if (r.u8() != kVersion) return std::nullopt;
    auto kind = r.u8();
    Message m;
    switch (static_cast<Kind>(kind)) {
      case Kind::Register: {
        Register v;
        v.auth = get_auth(r);
        m = v;
        break;
      }
      case Kind::RegisterOk: {
        RegisterOk v;
        v.status = get_status(r);
        v.id = r.u64();
        v.ek = r.fixed<32>();
        m = v;
        break;
      }
      case Kind::Upload: {
        Upload v;
        v.token.bytes = r.fixed<32>();
        v.day = r.u32();
        v.duration_sec = r.u32();
        v.auth = get_auth(r);
        m = v;
        break;
      }
      case Kind::UploadAck: {
        UploadAck v;
        v.status = get_status(r);
        m = v;
        break;
      }
      case Kind::EsrReq: {
        EsrReq v;
        v.id = r.u64();
        v.ek = r.fixed<32>();
        v.tokens = get_tokens(r);
        m = v;
        break;
      }
      case Kind::EsrRep: {
        EsrRep v;
        v.status = get_status(r);
        m = v;
        break;
      }
      case Kind::TestResult: {
        TestResult v;
        v.id = r.u64();
        v.ek = r.fixed<32>();
        v.positive = r.u8();
        v.auth = get_auth(r);
        m = v;
        break;
      }
      case Kind::StatelessEsr: {
        StatelessEsr v;
        v.day = r.u32();
        v.auth = get_auth(r);
        v.tokens = get_tokens(r);
        m = v;
        break;
      }
      case Kind::StatelessRep: {
        StatelessRep v;
        v.status = get_status(r);
        v.score = r.u64();
        m = v;
        break;
      }
      default:
        return std::nullopt;
    }
    r.expect_done();
    return m;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

}  // namespace pet::wire
