#include "pettrace/trace.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace pet::sim {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw TraceError("trace line " + std::to_string(line) + ": " + what);
}

}  // namespace

ContactTrace parse_trace(std::istream& in) {
  ContactTrace trace;
  bool have_population = false;
  bool have_days = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;  // blank or comment-only

    if (first == "population") {
      if (!(ls >> trace.population)) fail(lineno, "population needs a number");
      have_population = true;
      continue;
    }
    if (first == "days") {
      if (!(ls >> trace.horizon_days)) fail(lineno, "days needs a number");
      have_days = true;
      continue;
    }

    TraceEvent ev;
    try {
      ev.time = std::stoull(first);
    } catch (const std::exception&) {
      fail(lineno, "expected a timestamp or header keyword, got '" + first + "'");
    }
    std::string kind;
    if (!(ls >> kind)) fail(lineno, "missing event kind");
    if (kind == "start" || kind == "end") {
      ev.kind = kind == "start" ? TraceEventKind::ContactStart : TraceEventKind::ContactEnd;
      if (!(ls >> ev.a >> ev.b)) fail(lineno, kind + " needs two device ids");
    } else if (kind == "diagnose") {
      ev.kind = TraceEventKind::Diagnose;
      if (!(ls >> ev.a)) fail(lineno, "diagnose needs a device id");
    } else if (kind == "result") {
      ev.kind = TraceEventKind::TestResult;
      std::string verdict;
      if (!(ls >> ev.a >> verdict)) fail(lineno, "result needs a device id and a verdict");
      if (verdict == "positive") ev.positive = true;
      else if (verdict == "negative") ev.positive = false;
      else fail(lineno, "result verdict must be positive or negative");
    } else {
      fail(lineno, "unknown event kind '" + kind + "'");
    }
    std::string extra;
    if (ls >> extra) fail(lineno, "unexpected trailing field '" + extra + "'");
    trace.events.push_back(ev);
  }
  if (!have_population) throw TraceError("trace is missing the population header");
  if (!have_days) throw TraceError("trace is missing the days header");
  validate_trace(trace);
  return trace;
}

ContactTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file: " + path.string());
  return parse_trace(in);
}

void validate_trace(const ContactTrace& trace) {
  if (trace.population == 0) throw TraceError("population must be positive");
  if (trace.horizon_days == 0) throw TraceError("days must be positive");
  std::uint64_t horizon = static_cast<std::uint64_t>(trace.horizon_days) * 86400;
  std::uint64_t prev = 0;
  std::set<std::pair<std::uint32_t, std::uint32_t>> open;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& ev = trace.events[i];
    std::string at = "event " + std::to_string(i + 1);
    if (ev.time < prev) throw TraceError(at + ": events must be sorted by time");
    prev = ev.time;
    if (ev.time > horizon) throw TraceError(at + ": time is past the horizon");
    if (ev.a >= trace.population) throw TraceError(at + ": device id out of range");
    switch (ev.kind) {
      case TraceEventKind::ContactStart:
      case TraceEventKind::ContactEnd: {
        if (ev.b >= trace.population) throw TraceError(at + ": device id out of range");
        if (ev.a == ev.b) throw TraceError(at + ": a device cannot contact itself");
        std::pair<std::uint32_t, std::uint32_t> key = std::minmax(ev.a, ev.b);
        if (ev.kind == TraceEventKind::ContactStart) {
          if (!open.insert(key).second) throw TraceError(at + ": contact already open");
        } else {
          if (open.erase(key) == 0) throw TraceError(at + ": end without matching start");
        }
        break;
      }
      case TraceEventKind::Diagnose:
      case TraceEventKind::TestResult:
        break;
    }
  }
  if (!open.empty()) throw TraceError("trace ends with an unclosed contact");
}

std::string format_trace(const ContactTrace& trace) {
  std::ostringstream out;
  out << "population " << trace.population << "\n";
  out << "days " << trace.horizon_days << "\n";
  for (const auto& ev : trace.events) {
    out << ev.time << " ";
    switch (ev.kind) {
      case TraceEventKind::ContactStart:
        out << "start " << ev.a << " " << ev.b;
        break;
      case TraceEventKind::ContactEnd:
        out << "end " << ev.a << " " << ev.b;
        break;
      case TraceEventKind::Diagnose:
        out << "diagnose " << ev.a;
        break;
      case TraceEventKind::TestResult:
        out << "result " << ev.a << " " << (ev.positive ? "positive" : "negative");
        break;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace pet::sim
