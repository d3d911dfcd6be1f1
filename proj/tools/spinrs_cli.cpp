#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "config.hpp"
#include "spinrs/errors.hpp"

namespace {

void add_common(CLI::App* cmd, spinrs_cli::Options& o) {
  cmd->add_option("--config", o.config, "configuration file (INI sections: system, initial, integrate, observables, rng)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "random seed (overrides rng.seed)");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--samples", o.samples, "number of samples or trials");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace spinrs_cli;
  CLI::App app{"Simulation and verification tools for the trigonometric spin Ruijsenaars-Schneider system"};
  app.require_subcommand(1);
  Options o;
  auto* simulate = app.add_subcommand("simulate", "integrate a configured initial state; writes trajectory.csv and summary.json");
  auto* verify = app.add_subcommand("verify", "run a property suite; writes verify_<suite>.json");
  auto* rank = app.add_subcommand("rank", "Jacobian ranks of the integrals at random S1 points; writes rank.json");
  auto* normal = app.add_subcommand("normal-form", "build the normal-form point for y; writes normal_form.json");
  auto* limits = app.add_subcommand("limits", "scaling-limit and spinless checks; writes limits.json");
  for (auto* c : {simulate, verify, rank, normal, limits}) add_common(c, o);
  verify->add_option("--suite", o.suite, "zakrzewski, double, reduction, reduced-bracket, lax, invariant-algebra or limits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  try {
    if (*simulate) return run_simulate(o);
    if (*verify) return run_verify(o);
    if (*rank) return run_rank(o);
    if (*normal) return run_normal_form(o);
    if (*limits) return run_limits(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const spinrs::Error& e) {
    std::cerr << "dynamical error: " << e.what() << '\n';
    return kDynamicalAbort;
  }
  return kConfigError;
}
