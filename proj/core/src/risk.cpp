#include "pettrace/risk.hpp"

#include <stdexcept>
#include <string>

namespace pet::risk {

double AdditiveScorer::score(std::span<const ExposureEntry> entries, std::uint32_t today,
                             std::uint32_t window_days) const {
  double total = 0.0;
  for (const auto& e : entries) {
    if (e.day > today) continue;  // future-dated entries never count
    if (today - e.day > window_days) continue;
    total += static_cast<double>(e.duration_sec);
  }
  return total;
}

double AdditiveScorer::aggregate(std::span<const double> daily_scores) const {
  double total = 0.0;
  for (double s : daily_scores) total += s;
  return total;
}

std::unique_ptr<Scorer> make_scorer(std::string_view name) {
  if (name == "additive") return std::make_unique<AdditiveScorer>();
  throw std::invalid_argument("unknown scorer: " + std::string(name));
}

bool decide(double score, double threshold) { return score > threshold; }

bool probabilistic_notify(bool decision, double p, Rng& rng) {
  if (decision) return true;
  return rng.bernoulli(p);
}

}  // namespace pet::risk
