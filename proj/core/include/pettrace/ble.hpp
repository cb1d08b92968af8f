#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>

#include "pettrace/crypto.hpp"

namespace pet::ble {

// Fixed-size payloads. The 32-byte EBID never fits a single legacy
// advertisement, so it is split into two 16-byte halves carried by two
// payloads: either advertisement + scan response, or two fragments of the
// advertisement itself. Byte-level layouts are documented in
// docs/ble-payloads.md and frozen by tests/vectors/ble_payloads.txt.

inline constexpr std::size_t kAdvSize = 29;
inline constexpr std::size_t kScanRspSize = 24;

using AdvPayload = std::array<std::uint8_t, kAdvSize>;
using ScanRspPayload = std::array<std::uint8_t, kScanRspSize>;
using Half16 = std::array<std::uint8_t, 16>;

struct SegmentedEbid {
  Half16 high;  // EBID bytes 0..15
  Half16 low;   // EBID bytes 16..31
};

SegmentedEbid segment_ebid(const crypto::Ebid& ebid);
crypto::Ebid reassemble_ebid(const Half16& high, const Half16& low);

AdvPayload build_adv(const Half16& id_low, std::uint8_t version, std::uint8_t tx_gain);
ScanRspPayload build_scan_rsp(const Half16& id_high);

// Fragmented variant: two advertisement-shaped payloads, fragment 0 carrying
// the low half and fragment 1 the high half, distinguished by the first
// reserved byte.
std::array<AdvPayload, 2> build_fragments(const crypto::Ebid& ebid, std::uint8_t version,
                                          std::uint8_t tx_gain);

enum class ParseError : std::uint8_t {
  None = 0,
  Malformed,      // wrong length or inconsistent structure
  NotOurService,  // well-formed but a different service UUID
};

template <class T>
struct Parsed {
  std::optional<T> value;
  ParseError error = ParseError::None;

  bool ok() const { return value.has_value(); }
};

struct AdvFields {
  Half16 id_low{};
  std::uint8_t version = 0;
  std::uint8_t tx_gain = 0;
};

struct FragmentFields {
  Half16 half{};
  std::uint8_t index = 0;  // 0 = low half, 1 = high half
  std::uint8_t version = 0;
  std::uint8_t tx_gain = 0;
};

Parsed<AdvFields> parse_adv(std::span<const std::uint8_t> payload);
Parsed<Half16> parse_scan_rsp(std::span<const std::uint8_t> payload);
Parsed<FragmentFields> parse_fragment(std::span<const std::uint8_t> payload);

// Pairs the two halves seen from one transmitter address within one epoch.
// Returns the full EBID once both halves are present. A half that conflicts
// with a stored one resets the slot (the transmitter rotated mid-pairing or
// the air was garbled); a new epoch clears all slots for that address.
using DeviceAddr = std::array<std::uint8_t, 6>;
enum class HalfKind : std::uint8_t { Low = 0, High = 1 };

class ReassemblyCache {
 public:
  std::optional<crypto::Ebid> observe(const DeviceAddr& from, HalfKind kind, const Half16& half,
                                      std::uint64_t epoch);
  void clear();
  std::size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    std::optional<Half16> low;
    std::optional<Half16> high;
    std::uint64_t epoch = 0;
  };
  std::map<DeviceAddr, Slot> slots_;
};

}  // namespace pet::ble
