#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pet::sim {

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TraceEventKind : std::uint8_t {
  ContactStart,
  ContactEnd,
  Diagnose,
  TestResult,
};

struct TraceEvent {
  std::uint64_t time = 0;
  TraceEventKind kind = TraceEventKind::ContactStart;
  std::uint32_t a = 0;
  std::uint32_t b = 0;        // contacts only
  bool positive = false;      // test results only
};

// A population, a horizon and a time-ordered event list. Text format, one
// event per line, '#' comments:
//
//   population 50
//   days 14
//   0     start 1 2
//   900   end 1 2
//   86400 diagnose 1
//   90000 result 1 negative
struct ContactTrace {
  std::uint32_t population = 0;
  std::uint32_t horizon_days = 0;
  std::vector<TraceEvent> events;
};

// Parses and validates. Errors carry the offending line number. Validation:
// header fields present, events sorted by time, device ids in range, no
// self-contacts, start/end pairs matched with no double-start, every event
// inside the horizon.
ContactTrace parse_trace(std::istream& in);
ContactTrace load_trace(const std::filesystem::path& path);
void validate_trace(const ContactTrace& trace);

std::string format_trace(const ContactTrace& trace);

}  // namespace pet::sim
