#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace pet {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All protocol and simulation knobs in one place. Defaults describe the
// reference deployment; scenario JSON files override individual fields.
struct ProtocolConfig {
  // Protocol timing.
  std::uint32_t epoch_duration_sec = 900;
  std::uint32_t retention_days = 14;       // how far back exposure counts
  std::uint32_t esr_per_day = 4;           // honest request budget per device
  std::uint32_t min_encounter_sec = 120;   // shorter encounters are discarded
  std::uint32_t peer_loss_timeout_sec = 60;
  std::uint32_t notified_reset_days = 3;   // at-risk flag lifetime

  // Request shaping and risk policy.
  std::uint32_t request_padding_tokens = 64;
  double risk_threshold = 900.0;           // seconds of in-window exposure
  double notify_probability = 0.0;         // plausible-deniability rate
  std::uint32_t min_exposed_count = 1;     // entries needed before notifying
  std::string scorer = "additive";

  // Radio model.
  std::uint32_t beacon_interval_sec = 3;
  std::string ble_variant = "scan_response";  // or "fragment"

  // Channel model.
  std::uint64_t proxy_delay_sec = 0;
  std::uint64_t mix_delay_min_sec = 0;
  std::uint64_t mix_delay_max_sec = 21600;

  // Crypto sizes.
  unsigned rsa_modulus_bits = 1024;

  // Derived: minimum epochs between served requests. 86400 must be divisible
  // by esr_per_day * epoch_duration_sec so the budget is a whole number.
  std::uint32_t esr_min_epochs() const {
    return 86400u / (esr_per_day * epoch_duration_sec);
  }
  std::uint32_t epochs_per_day() const { return 86400u / epoch_duration_sec; }

  // Throws ConfigError with a field-specific message.
  void validate() const;
};

// Reads a JSON object whose keys mirror the field names above. Unknown keys
// are rejected so typos fail loudly. The result is validated.
ProtocolConfig load_config(const std::filesystem::path& path);
ProtocolConfig parse_config(const std::string& json_text);

}  // namespace pet
