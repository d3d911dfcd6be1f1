#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace spinrs_cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDynamicalAbort = 2, kVerificationFailure = 3 };

struct Options {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<long> samples;
  std::string suite;
};

int run_simulate(const Options& o);
int run_verify(const Options& o);
int run_rank(const Options& o);
int run_normal_form(const Options& o);
int run_limits(const Options& o);

}  // namespace spinrs_cli
