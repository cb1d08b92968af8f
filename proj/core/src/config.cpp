#include "pettrace/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pet {

void ProtocolConfig::validate() const {
  if (epoch_duration_sec == 0 || 86400 % epoch_duration_sec != 0)
    throw ConfigError("epoch_duration_sec must divide 86400");
  if (retention_days == 0) throw ConfigError("retention_days must be positive");
  if (esr_per_day == 0) throw ConfigError("esr_per_day must be positive");
  if (86400 % (static_cast<std::uint64_t>(esr_per_day) * epoch_duration_sec) != 0)
    throw ConfigError("esr_per_day * epoch_duration_sec must divide 86400");
  if (min_encounter_sec == 0) throw ConfigError("min_encounter_sec must be positive");
  if (peer_loss_timeout_sec == 0) throw ConfigError("peer_loss_timeout_sec must be positive");
  if (notified_reset_days == 0) throw ConfigError("notified_reset_days must be positive");
  if (request_padding_tokens == 0) throw ConfigError("request_padding_tokens must be positive");
  if (risk_threshold < 0) throw ConfigError("risk_threshold must be non-negative");
  if (notify_probability < 0.0 || notify_probability > 1.0)
    throw ConfigError("notify_probability must be in [0, 1]");
  if (min_exposed_count == 0) throw ConfigError("min_exposed_count must be positive");
  if (scorer != "additive") throw ConfigError("unknown scorer: " + scorer);
  if (beacon_interval_sec == 0) throw ConfigError("beacon_interval_sec must be positive");
  if (ble_variant != "scan_response" && ble_variant != "fragment")
    throw ConfigError("ble_variant must be scan_response or fragment");
  if (mix_delay_min_sec > mix_delay_max_sec)
    throw ConfigError("mix_delay_min_sec exceeds mix_delay_max_sec");
  if (rsa_modulus_bits < 512) throw ConfigError("rsa_modulus_bits must be at least 512");
}

ProtocolConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  ProtocolConfig c;
  try {
    for (auto& [key, value] : j.items()) {
      if (key == "epoch_duration_sec") c.epoch_duration_sec = value.get<std::uint32_t>();
      else if (key == "retention_days") c.retention_days = value.get<std::uint32_t>();
      else if (key == "esr_per_day") c.esr_per_day = value.get<std::uint32_t>();
      else if (key == "min_encounter_sec") c.min_encounter_sec = value.get<std::uint32_t>();
      else if (key == "peer_loss_timeout_sec") c.peer_loss_timeout_sec = value.get<std::uint32_t>();
      else if (key == "notified_reset_days") c.notified_reset_days = value.get<std::uint32_t>();
      else if (key == "request_padding_tokens") c.request_padding_tokens = value.get<std::uint32_t>();
      else if (key == "risk_threshold") c.risk_threshold = value.get<double>();
      else if (key == "notify_probability") c.notify_probability = value.get<double>();
      else if (key == "min_exposed_count") c.min_exposed_count = value.get<std::uint32_t>();
      else if (key == "scorer") c.scorer = value.get<std::string>();
      else if (key == "beacon_interval_sec") c.beacon_interval_sec = value.get<std::uint32_t>();
      else if (key == "ble_variant") c.ble_variant = value.get<std::string>();
      else if (key == "proxy_delay_sec") c.proxy_delay_sec = value.get<std::uint64_t>();
      else if (key == "mix_delay_min_sec") c.mix_delay_min_sec = value.get<std::uint64_t>();
      else if (key == "mix_delay_max_sec") c.mix_delay_max_sec = value.get<std::uint64_t>();
      else if (key == "rsa_modulus_bits") c.rsa_modulus_bits = value.get<unsigned>();
      else throw ConfigError("unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ProtocolConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace pet
