#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "pettrace/blindsig.hpp"
#include "pettrace/bytes.hpp"
#include "pettrace/crypto.hpp"

namespace pet::wire {

// Device <-> serverframing. Every message starts with a version byte and a
// kind byte; the rest is kind-specific, big-endian throughout. Decoding is
// strict: unknown kinds, truncation and trailing bytes all fail. None of the
// messages carries a device address or any other sender identifier; the only
// long-lived handle is the registration id inside the encrypted-entry flow.

inline constexpr std::uint8_t kVersion = 0x01;

enum class Kind : std::uint8_t {
  Register = 0x01,
  RegisterOk = 0x02,
  Upload = 0x03,
  UploadAck = 0x04,
  EsrReq = 0x05,
  EsrRep = 0x06,
  TestResult = 0x07,
  StatelessEsr = 0x08,
  StatelessRep = 0x09,
};

enum class Status : std::uint8_t {
  Ok = 0x00,          // processed; for EsrRep this means "not at risk"
  AtRisk = 0x01,
  RateLimited = 0x02,
  AuthFailure = 0x03,  // bad token, replayed token, or unknown/undecryptable id
};

struct AuthTokenWire {
  std::array<std::uint8_t, 32> r{};
  Bytes sigma;  // big-endian magnitude

  static AuthTokenWire from(const blindsig::AuthToken& t);
  blindsig::AuthToken to_token() const;
  bool operator==(const AuthTokenWire&) const = default;
};

struct Register {
  AuthTokenWire auth;
  bool operator==(const Register&) const = default;
};

struct RegisterOk {
  Status status = Status::Ok;
  std::uint64_t id = 0;
  crypto::EntryKey ek{};
  bool operator==(const RegisterOk&) const = default;
};

struct Upload {
  crypto::PetToken token;
  std::uint32_t day = 0;
  std::uint32_t duration_sec = 0;
  AuthTokenWire auth;
  bool operator==(const Upload&) const = default;
};

struct UploadAck {
  Status status = Status::Ok;
  bool operator==(const UploadAck&) const = default;
};

struct EsrReq {
  std::uint64_t id = 0;
  crypto::EntryKey ek{};
  std::vector<crypto::PetToken> tokens;
  bool operator==(const EsrReq&) const = default;
};

struct EsrRep {
  Status status = Status::Ok;
  bool operator==(const EsrRep&) const = default;
};

struct TestResult {
  std::uint64_t id = 0;
  crypto::EntryKey ek{};
  std::uint8_t positive = 0;
  AuthTokenWire auth;
  bool operator==(const TestResult&) const = default;
};

struct StatelessEsr {
  std::uint32_t day = 0;
  AuthTokenWire auth;
  std::vector<crypto::PetToken> tokens;
  bool operator==(const StatelessEsr&) const = default;
};

struct StatelessRep {
  Status status = Status::Ok;
  std::uint64_t score = 0;  // whole seconds of matched exposure for the queried day
  bool operator==(const StatelessRep&) const = default;
};

using Message = std::variant<Register, RegisterOk, Upload, UploadAck, EsrReq, EsrRep, TestResult,
                             StatelessEsr, StatelessRep>;

Kind kind_of(const Message& m);
Bytes encode(const Message& m);
std::optional<Message> decode(std::span<const std::uint8_t> data);

}  // namespace pet::wire
