// Command-line front end: `run` executes a contact trace against one server
// and reports outcomes plus audits; `attack` executes one adversarial drill.
// Exit code is 0 only when every audit (or the drill verdict) passes.

#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pettrace/attacks.hpp"
#include "pettrace/config.hpp"
#include "pettrace/sim.hpp"
#include "pettrace/trace.hpp"

using namespace pet;

namespace {

int do_run(const std::string& trace_path, const std::string& config_path, std::uint64_t seed,
           const std::string& mode, const std::string& report_path, bool parallel,
           unsigned threads) {
  auto trace = sim::load_trace(trace_path);
  ProtocolConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);

  sim::SimOptions opt;
  opt.mode = mode == "stateless" ? sim::Mode::Stateless : sim::Mode::Stateful;
  opt.parallel = parallel;
  opt.threads = threads;

  sim::Simulation simulation(std::move(trace), cfg, seed, opt);
  auto rep = simulation.run();

  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot open report path: " << report_path << "\n";
      return 2;
    }
    out << rep.to_table();
  }
  std::cout << rep.to_summary();
  return rep.audits.all() ? 0 : 1;
}

int do_attack(const std::string& name, const std::string& trace_path, std::uint64_t seed) {
  auto trace = sim::load_trace(trace_path);
  auto cfg = attacks::attack_config();
  attacks::AttackOutcome outcome;
  if (name == "replay") {
    outcome = attacks::run_replay_attack(trace, cfg, seed);
  } else if (name == "one-entry") {
    outcome = attacks::run_one_entry_attack(trace, cfg, seed);
  } else {
    outcome = attacks::run_linkability_check(trace, cfg, seed);
  }
  std::cout << outcome.to_text();
  return outcome.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy-preserving exposure notification scenario driver"};
  app.require_subcommand(1);

  std::string trace_path;
  std::string config_path;
  std::string report_path;
  std::string mode = "stateful";
  std::string attack_name;
  std::uint64_t seed = 1;
  bool parallel = false;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "run a contact trace end to end");
  run->add_option("--trace", trace_path, "contact trace file")->required()->check(CLI::ExistingFile);
  run->add_option("--config", config_path, "JSON protocol config (defaults when omitted)")
      ->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "RNG seed");
  run->add_option("--mode", mode, "stateful or stateless")
      ->check(CLI::IsMember({"stateful", "stateless"}));
  run->add_option("--report", report_path, "write the machine-readable table here");
  run->add_flag("--parallel", parallel, "run device phases on a thread pool");
  run->add_option("--threads", threads, "thread count for --parallel (0 = auto)");

  auto* attack = app.add_subcommand("attack", "run one adversarial drill");
  attack->add_option("--name", attack_name, "replay, one-entry or linkability")
      ->required()
      ->check(CLI::IsMember({"replay", "one-entry", "linkability"}));
  attack->add_option("--trace", trace_path, "contact trace file")
      ->required()
      ->check(CLI::ExistingFile);
  attack->add_option("--seed", seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run)) {
      return do_run(trace_path, config_path, seed, mode, report_path, parallel, threads);
    }
    return do_attack(attack_name, trace_path, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
