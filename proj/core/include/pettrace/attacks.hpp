#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pettrace/config.hpp"
#include "pettrace/sim.hpp"
#include "pettrace/trace.hpp"

namespace pet::attacks {

// Result of one adversarial scenario. `lines` carries the evidence, one
// observation per line, suitable for printing; `pass` is the verdict that
// the protocol behaved as designed under the attack.
struct AttackOutcome {
  std::string name;
  bool pass = false;
  std::vector<std::string> lines;

  std::string to_text() const;
};

// Baseline knobs for the adversarial scenarios: deterministic decisions
// (no probabilistic flips), a short mix window so uploads land before the
// next request round, and a threshold short scripted contacts can cross.
ProtocolConfig attack_config();

// Rebroadcasts a diagnosed device's stale identifier at a bystander after
// an epoch rotation (expects zero matches), then relays live within the
// capture epoch (expects a match: the documented in-epoch bound).
// The trace must contain a diagnosed device with at least one contact and
// one device with no contacts at all, which plays the attack target.
AttackOutcome run_replay_attack(const sim::ContactTrace& trace, const ProtocolConfig& cfg,
                                std::uint64_t seed);

// Adversary holds exactly one request-list entry for a diagnosed victim and
// queries. Shows the bare attack learning the victim's status, then each
// mitigation: the minimum-entry rule, the request budget, and probabilistic
// notification (Monte-Carlo false-positive rate against p).
// The trace must contain one contact pair whose first member to appear in a
// diagnose event plays the victim; the other plays the adversary.
AttackOutcome run_one_entry_attack(const sim::ContactTrace& trace, const ProtocolConfig& cfg,
                                   std::uint64_t seed);

// Server-view audit: request-side and upload-side token sets must never
// intersect and no real token may appear in two devices' requests. Runs the
// trace honestly (audit must pass), reruns it with a deliberately broken
// client that uploads request-side tokens (audit must fail), and checks the
// vacuous empty-run case.
AttackOutcome run_linkability_check(const sim::ContactTrace& trace, const ProtocolConfig& cfg,
                                    std::uint64_t seed);

}  // namespace pet::attacks
