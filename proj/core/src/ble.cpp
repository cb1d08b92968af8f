#include "pettrace/ble.hpp"

#include <algorithm>
#include <cstring>

namespace pet::ble {

namespace {

// Service UUIDs, little-endian on the air as BLE requires. 0xFD01 marks the
// advertisement (low half), 0xFD02 the scan response (high half).
constexpr std::uint8_t kAdvUuidLo = 0x01;
constexpr std::uint8_t kScanUuidLo = 0x02;
constexpr std::uint8_t kUuidHi = 0xFD;

// adv layout: flags AD (3) | 16-bit service UUID AD (4) | service data:
// uuid echo (2) + id_low (16) + version (1) + tx_gain (1) + reserved (2).
constexpr std::size_t kAdvUuidOff = 5;
constexpr std::size_t kAdvDataUuidOff = 7;
constexpr std::size_t kAdvIdOff = 9;
constexpr std::size_t kAdvVersionOff = 25;
constexpr std::size_t kAdvGainOff = 26;
constexpr std::size_t kAdvReservedOff = 27;

// scan response layout: 16-bit service UUID AD (4) | service data:
// uuid echo (2) + id_high (16) + reserved (2).
constexpr std::size_t kRspUuidOff = 2;
constexpr std::size_t kRspDataUuidOff = 4;
constexpr std::size_t kRspIdOff = 6;

}  // namespace

SegmentedEbid segment_ebid(const crypto::Ebid& ebid) {
  SegmentedEbid out;
  std::copy_n(ebid.begin(), 16, out.high.begin());
  std::copy_n(ebid.begin() + 16, 16, out.low.begin());
  return out;
}

crypto::Ebid reassemble_ebid(const Half16& high, const Half16& low) {
  crypto::Ebid out{};
  std::copy(high.begin(), high.end(), out.begin());
  std::copy(low.begin(), low.end(), out.begin() + 16);
  return out;
}

AdvPayload build_adv(const Half16& id_low, std::uint8_t version, std::uint8_t tx_gain) {
  AdvPayload p{};
  p[0] = 0x02; p[1] = 0x01; p[2] = 0x06;                       // flags: general discoverable, no BR/EDR
  p[3] = 0x03; p[4] = 0x03; p[5] = kAdvUuidLo; p[6] = kUuidHi; // complete 16-bit UUID list
  p[kAdvDataUuidOff] = kAdvUuidLo;
  p[kAdvDataUuidOff + 1] = kUuidHi;
  std::copy(id_low.begin(), id_low.end(), p.begin() + kAdvIdOff);
  p[kAdvVersionOff] = version;
  p[kAdvGainOff] = tx_gain;
  return p;
}

ScanRspPayload build_scan_rsp(const Half16& id_high) {
  ScanRspPayload p{};
  p[0] = 0x03; p[1] = 0x03; p[2] = kScanUuidLo; p[3] = kUuidHi;
  p[kRspDataUuidOff] = kScanUuidLo;
  p[kRspDataUuidOff + 1] = kUuidHi;
  std::copy(id_high.begin(), id_high.end(), p.begin() + kRspIdOff);
  return p;
}

std::array<AdvPayload, 2> build_fragments(const crypto::Ebid& ebid, std::uint8_t version,
                                          std::uint8_t tx_gain) {
  auto seg = segment_ebid(ebid);
  AdvPayload frag0 = build_adv(seg.low, version, tx_gain);
  AdvPayload frag1 = build_adv(seg.high, version, tx_gain);
  frag0[kAdvReservedOff] = 0;
  frag1[kAdvReservedOff] = 1;
  return {frag0, frag1};
}

Parsed<AdvFields> parse_adv(std::span<const std::uint8_t> payload) {
  if (payload.size() != kAdvSize) return {std::nullopt, ParseError::Malformed};
  if (payload[0] != 0x02 || payload[1] != 0x01) return {std::nullopt, ParseError::Malformed};
  if (payload[3] != 0x03 || payload[4] != 0x03) return {std::nullopt, ParseError::Malformed};
  bool uuid_ok = payload[kAdvUuidOff] == kAdvUuidLo && payload[kAdvUuidOff + 1] == kUuidHi;
  bool data_uuid_ok =
      payload[kAdvDataUuidOff] == kAdvUuidLo && payload[kAdvDataUuidOff + 1] == kUuidHi;
  if (uuid_ok != data_uuid_ok) return {std::nullopt, ParseError::Malformed};
  if (!uuid_ok) return {std::nullopt, ParseError::NotOurService};
  AdvFields f;
  std::memcpy(f.id_low.data(), payload.data() + kAdvIdOff, 16);
  f.version = payload[kAdvVersionOff];
  f.tx_gain = payload[kAdvGainOff];
  return {f, ParseError::None};
}

Parsed<Half16> parse_scan_rsp(std::span<const std::uint8_t> payload) {
  if (payload.size() != kScanRspSize) return {std::nullopt, ParseError::Malformed};
  if (payload[0] != 0x03 || payload[1] != 0x03) return {std::nullopt, ParseError::Malformed};
  bool uuid_ok = payload[kRspUuidOff] == kScanUuidLo && payload[kRspUuidOff + 1] == kUuidHi;
  bool data_uuid_ok =
      payload[kRspDataUuidOff] == kScanUuidLo && payload[kRspDataUuidOff + 1] == kUuidHi;
  if (uuid_ok != data_uuid_ok) return {std::nullopt, ParseError::Malformed};
  if (!uuid_ok) return {std::nullopt, ParseError::NotOurService};
  Half16 id_high;
  std::memcpy(id_high.data(), payload.data() + kRspIdOff, 16);
  return {id_high, ParseError::None};
}

Parsed<FragmentFields> parse_fragment(std::span<const std::uint8_t> payload) {
  auto adv = parse_adv(payload);
  if (!adv.ok()) return {std::nullopt, adv.error};
  std::uint8_t index = payload[kAdvReservedOff];
  if (index > 1) return {std::nullopt, ParseError::Malformed};
  FragmentFields f;
  f.half = adv.value->id_low;
  f.index = index;
  f.version = adv.value->version;
  f.tx_gain = adv.value->tx_gain;
  return {f, ParseError::None};
}

std::optional<crypto::Ebid> ReassemblyCache::observe(const DeviceAddr& from, HalfKind kind,
                                                     const Half16& half, std::uint64_t epoch) {
  Slot& slot = slots_[from];
  if (slot.epoch != epoch) slot = Slot{.low = {}, .high = {}, .epoch = epoch};
  auto& mine = kind == HalfKind::Low ? slot.low : slot.high;
  if (mine.has_value() && *mine != half) {
    slot = Slot{.low = {}, .high = {}, .epoch = epoch};
    (kind == HalfKind::Low ? slot.low : slot.high) = half;
    return std::nullopt;
  }
  mine = half;
  if (slot.low && slot.high) return reassemble_ebid(*slot.high, *slot.low);
  return std::nullopt;
}

void ReassemblyCache::clear() { slots_.clear(); }

}  // namespace pet::ble
