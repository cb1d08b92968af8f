#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "pettrace/bytes.hpp"
#include "pettrace/rng.hpp"

namespace pet::risk {

// One matched exposure: the day it happened, how long it lasted, and an
// opaque metadata slot for future signals (signal strength percentiles and
// the like). Scorers must treat meta as optional input.
struct ExposureEntry {
  std::uint32_t day = 0;
  std::uint32_t duration_sec = 0;
  Bytes meta;

  bool operator==(const ExposureEntry&) const = default;
};

// Pluggable scoring strategy. score() sees the full exposure history of one
// registered entry and must only count entries within the retention window
// (day >= today - window_days). aggregate() folds per-day partial scores, for
// deployments where queries are split by day.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(std::span<const ExposureEntry> entries, std::uint32_t today,
                       std::uint32_t window_days) const = 0;
  virtual double aggregate(std::span<const double> daily_scores) const = 0;
  virtual std::string_view name() const = 0;
};

// Default strategy: total in-window exposure seconds. Additivity makes the
// per-day split exactly equivalent to one global evaluation.
class AdditiveScorer final : public Scorer {
 public:
  double score(std::span<const ExposureEntry> entries, std::uint32_t today,
               std::uint32_t window_days) const override;
  double aggregate(std::span<const double> daily_scores) const override;
  std::string_view name() const override { return "additive"; }
};

// Throws std::invalid_argument for unknown names.
std::unique_ptr<Scorer> make_scorer(std::string_view name);

// Notification decision: strictly above the threshold.
bool decide(double score, double threshold);

// Plausible-deniability filter applied after the decision. A negative
// decision turns positive with probability p; a positive decision is passed
// through unchanged.
bool probabilistic_notify(bool decision, double p, Rng& rng);

}  // namespace pet::risk
