#include "pettrace/attacks.hpp"

#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pettrace/blindsig.hpp"
#include "pettrace/server.hpp"
#include "pettrace/wire.hpp"

namespace pet::attacks {

namespace {

ble::DeviceAddr attacker_addr(std::uint8_t k) { return {0xA7, 0x7A, 0xC4, 0xE5, 0x00, k}; }

struct ContactWindow {
  std::uint32_t peer = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;
};

std::optional<std::uint32_t> first_diagnosed(const sim::ContactTrace& trace) {
  for (const auto& ev : trace.events) {
    if (ev.kind == sim::TraceEventKind::Diagnose) return ev.a;
  }
  return std::nullopt;
}

// First completed contact interval involving `dev`.
std::optional<ContactWindow> first_contact_of(const sim::ContactTrace& trace, std::uint32_t dev) {
  for (const auto& ev : trace.events) {
    if (ev.kind != sim::TraceEventKind::ContactStart || (ev.a != dev && ev.b != dev)) continue;
    ContactWindow w;
    w.peer = ev.a == dev ? ev.b : ev.a;
    w.start = ev.time;
    for (const auto& end_ev : trace.events) {
      if (end_ev.kind == sim::TraceEventKind::ContactEnd && end_ev.time > ev.time &&
          ((end_ev.a == ev.a && end_ev.b == ev.b) || (end_ev.a == ev.b && end_ev.b == ev.a))) {
        w.end = end_ev.time;
        return w;
      }
    }
    return std::nullopt;
  }
  return std::nullopt;
}

// Highest device id that never takes part in any contact.
std::optional<std::uint32_t> passive_device(const sim::ContactTrace& trace) {
  std::set<std::uint32_t> busy;
  for (const auto& ev : trace.events) {
    if (ev.kind == sim::TraceEventKind::ContactStart || ev.kind == sim::TraceEventKind::ContactEnd) {
      busy.insert(ev.a);
      busy.insert(ev.b);
    }
  }
  for (std::uint32_t i = trace.population; i-- > 0;) {
    if (!busy.contains(i)) return i;
  }
  return std::nullopt;
}

std::string yesno(bool v) { return v ? "yes" : "no"; }

}  // namespace

std::string AttackOutcome::to_text() const {
  std::ostringstream out;
  out << "attack " << name << '\n';
  for (const auto& line : lines) out << "  " << line << '\n';
  out << "verdict " << (pass ? "PASS" : "FAIL") << '\n';
  return out.str();
}

ProtocolConfig attack_config() {
  ProtocolConfig cfg;
  cfg.risk_threshold = 600.0;
  cfg.notify_probability = 0.0;
  cfg.mix_delay_max_sec = 600;
  return cfg;
}

AttackOutcome run_replay_attack(const sim::ContactTrace& trace, const ProtocolConfig& cfg,
                                std::uint64_t seed) {
  AttackOutcome out{"replay", false, {}};
  auto victim = first_diagnosed(trace);
  if (!victim) throw std::invalid_argument("replay trace needs a diagnosed device");
  auto contact = first_contact_of(trace, *victim);
  if (!contact) throw std::invalid_argument("replay trace needs a contact for the diagnosed device");
  auto target = passive_device(trace);
  if (!target) throw std::invalid_argument("replay trace needs a device with no contacts");
  std::uint64_t ep = cfg.epoch_duration_sec;
  if (ep <= cfg.min_encounter_sec)
    throw std::invalid_argument("epoch must exceed min_encounter_sec for the replay window");

  // Stale rebroadcast: the attacker records the victim's broadcast during
  // the contact and replays it at the target for one full epoch after the
  // next rotation. The replayed identifier no longer matches anything the
  // victim will upload, so the target must stay clean.
  std::uint64_t replay_start = (contact->end + ep - 1) / ep * ep;
  auto lag = static_cast<std::uint32_t>(replay_start / ep - contact->start / ep);
  sim::Simulation stale(trace, cfg, seed);
  stale.add_injection({replay_start, replay_start + ep, *victim, *target, lag, attacker_addr(1)});
  auto stale_rep = stale.run();
  const auto& stale_target = stale_rep.devices[*target];
  const auto& stale_peer = stale_rep.devices[contact->peer];
  bool target_clean = !stale_target.notified && stale_target.at_risk_replies == 0 &&
                      stale_target.risk_score == 0;
  bool peer_notified = stale_peer.notified;

  out.lines.push_back("stale rebroadcast, " + std::to_string(lag) +
                      " epoch(s) after capture: target matches=" +
                      std::to_string(stale_target.risk_score) +
                      " notified=" + yesno(stale_target.notified));
  out.lines.push_back("genuine contact in the same run notified=" + yesno(peer_notified) +
                      " (pipeline sanity)");

  // Live relay: the attacker forwards both directions during the contact
  // epoch itself. Both ends derive matching tokens, so the relayed target
  // is notified; this is the documented in-epoch exposure of the scheme.
  sim::Simulation relay(trace, cfg, seed);
  relay.add_injection({contact->start, contact->end, *victim, *target, 0, attacker_addr(1)});
  relay.add_injection({contact->start, contact->end, *target, *victim, 0, attacker_addr(2)});
  auto relay_rep = relay.run();
  const auto& relay_target = relay_rep.devices[*target];
  bool relay_hits = relay_target.notified && relay_target.at_risk_replies >= 1;
  out.lines.push_back("live in-epoch relay: target score=" +
                      std::to_string(relay_target.risk_score) +
                      " notified=" + yesno(relay_target.notified) + " (known in-epoch bound)");

  bool audits_ok = stale_rep.audits.all() && relay_rep.audits.all();
  out.lines.push_back("run audits clean=" + yesno(audits_ok));
  out.pass = target_clean && peer_notified && relay_hits && audits_ok;
  return out;
}

AttackOutcome run_one_entry_attack(const sim::ContactTrace& trace, const ProtocolConfig& cfg,
                                   std::uint64_t seed) {
  AttackOutcome out{"one-entry", false, {}};
  auto victim = first_diagnosed(trace);
  if (!victim) throw std::invalid_argument("one-entry trace needs a diagnosed device");
  auto contact = first_contact_of(trace, *victim);
  if (!contact) throw std::invalid_argument("one-entry trace needs a victim contact");
  std::uint32_t adversary = contact->peer;

  // Bare attack: one matching entry, no mitigations. The adversary's single
  // request-list entry comes back "at risk", identifying the victim.
  ProtocolConfig bare = cfg;
  bare.min_exposed_count = 1;
  sim::Simulation bare_sim(trace, bare, seed);
  auto bare_rep = bare_sim.run();
  bool bare_leak = bare_rep.devices[adversary].notified;
  out.lines.push_back("no mitigations: adversary with one entry learns status=" +
                      yesno(bare_leak));

  // Minimum-entry rule: the same single match must come back "not at risk".
  ProtocolConfig min2 = cfg;
  min2.min_exposed_count = 2;
  sim::Simulation min2_sim(trace, min2, seed);
  auto min2_rep = min2_sim.run();
  bool min2_blocked = !min2_rep.devices[adversary].notified && min2_rep.matched_tuples >= 1;
  out.lines.push_back("minimum-entry rule (2): reply stays negative despite " +
                      std::to_string(min2_rep.matched_tuples) +
                      " match(es), blocked=" + yesno(min2_blocked));

  // Request budget: repeated probing inside the same window is refused.
  {
    ProtocolConfig srv_cfg = cfg;
    srv_cfg.rsa_modulus_bits = 512;
    Rng rng(seed ^ 0x6f6e655f656e74ULL);
    server::Server server(srv_cfg, rng.fork(1));
    Rng client = rng.fork(2);
    auto token = blindsig::issue_token(server.authority_key(server::TokenClass::Registration),
                                       client);
    auto reg = server.handle_register({wire::AuthTokenWire::from(token)}, 0);
    wire::EsrReq probe;
    probe.id = reg.id;
    probe.ek = reg.ek;
    std::uint32_t min_gap = srv_cfg.esr_min_epochs();
    auto first = server.handle_esr(probe, min_gap);
    auto early = server.handle_esr(probe, 2ull * min_gap - 1);
    auto on_time = server.handle_esr(probe, 2ull * min_gap);
    bool budget_holds = first.status == wire::Status::Ok &&
                        early.status == wire::Status::RateLimited &&
                        on_time.status == wire::Status::Ok;
    out.lines.push_back("request budget: probe after " + std::to_string(min_gap - 1) +
                        " epochs refused, after " + std::to_string(min_gap) +
                        " served, holds=" + yesno(budget_holds));
    out.pass = budget_holds;  // combined below
  }
  bool budget_holds = out.pass;

  // Probabilistic notification: with p the adversary's inference gains a
  // false-positive rate of about p, diluting the single-entry signal.
  // Monte Carlo over a population with contacts but no diagnoses.
  double p = 0.05;
  std::uint32_t population = 2000;
  sim::ContactTrace mc;
  mc.population = population;
  mc.horizon_days = 1;
  for (std::uint32_t i = 0; i + 1 < population; i += 2) {
    mc.events.push_back({900, sim::TraceEventKind::ContactStart, i, i + 1, false});
  }
  for (std::uint32_t i = 0; i + 1 < population; i += 2) {
    mc.events.push_back({1200, sim::TraceEventKind::ContactEnd, i, i + 1, false});
  }
  ProtocolConfig dilute = cfg;
  dilute.notify_probability = p;
  dilute.esr_per_day = 1;  // exactly one decision per device inside the horizon
  dilute.proxy_delay_sec = 0;
  dilute.rsa_modulus_bits = 512;
  sim::Simulation mc_sim(mc, dilute, seed);
  auto mc_rep = mc_sim.run();
  std::uint32_t flagged = 0;
  for (const auto& d : mc_rep.devices) {
    if (d.notified) flagged++;
  }
  double fraction = static_cast<double>(flagged) / population;
  double bound = 3.0 * std::sqrt(p * (1.0 - p) / population);
  bool dilution_ok = std::abs(fraction - p) <= bound;
  {
    std::ostringstream line;
    line << "probabilistic notification p=" << p << ": false-positive fraction " << flagged << '/'
         << population << " = " << fraction << ", |fraction-p| <= " << bound << ": "
         << yesno(dilution_ok);
    out.lines.push_back(line.str());
  }

  out.pass = bare_leak && min2_blocked && budget_holds && dilution_ok;
  return out;
}

AttackOutcome run_linkability_check(const sim::ContactTrace& trace, const ProtocolConfig& cfg,
                                    std::uint64_t seed) {
  AttackOutcome out{"linkability", false, {}};

  sim::Simulation honest(trace, cfg, seed);
  auto honest_rep = honest.run();
  out.lines.push_back("honest run: request/upload token sets disjoint=" +
                      yesno(honest_rep.audits.unlinkability) +
                      ", all audits=" + yesno(honest_rep.audits.all()));

  sim::SimOptions broken;
  broken.control_upload_request_list = true;
  sim::Simulation control(trace, cfg, seed, broken);
  auto control_rep = control.run();
  out.lines.push_back("negative control (uploads request-side tokens): audit failed=" +
                      yesno(!control_rep.audits.unlinkability));

  sim::ContactTrace empty;
  empty.population = 2;
  empty.horizon_days = 1;
  sim::Simulation vacuous(empty, cfg, seed);
  auto vacuous_rep = vacuous.run();
  out.lines.push_back("empty run: audit vacuously clean=" +
                      yesno(vacuous_rep.audits.unlinkability));

  out.pass = honest_rep.audits.all() && !control_rep.audits.unlinkability &&
             vacuous_rep.audits.unlinkability;
  return out;
}

}  // namespace pet::attacks
