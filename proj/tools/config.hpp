#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spinrs/linalg.hpp"

namespace spinrs_cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class InitialMode { normal_form, s1_coords, qpW, explicit_state };
enum class Solver { rk4, exact, both };

struct Config {
  // [system]
  long n = 3;
  long d = 2;
  double gamma = 0.5;
  // [initial]
  InitialMode mode = InitialMode::s1_coords;
  bool random = false;
  std::vector<double> y;      // normal-form eigenvalue data
  std::vector<double> q;      // explicit angles
  std::vector<double> v_re;   // explicit spins, row-major n x d
  std::vector<double> v_im;
  // [integrate]
  double h = 1e-3;
  double T = 1.0;
  int sample_every = 10;
  Solver solver = Solver::rk4;
  // [observables]
  std::vector<int> ks = {0, 1, 2};
  std::vector<std::pair<long, long>> pairs;  // zero-based (alpha, beta); empty means all
  // [rng]
  std::uint64_t seed = 1;
};

Config default_config();
Config load_config(const std::string& path);
void validate(const Config& c);

std::string to_string(InitialMode m);
std::string to_string(Solver s);

}  // namespace spinrs_cli
