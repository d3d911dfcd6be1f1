#include "config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <set>

namespace spinrs_cli {

namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string trimmed = boost::algorithm::trim_copy(s);
  if (trimmed.empty()) return parts;
  boost::algorithm::split(parts, trimmed, boost::algorithm::is_any_of(","));
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

template <class T>
T parse_scalar(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_same_v<T, double>)
      value = std::stod(text, &used);
    else if constexpr (std::is_same_v<T, std::uint64_t>)
      value = std::stoull(text, &used);
    else
      value = static_cast<T>(std::stol(text, &used));
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": '" + text + "'");
  }
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& p : split_list(text)) out.push_back(parse_scalar<T>(key, p));
  return out;
}

InitialMode parse_mode(const std::string& s) {
  if (s == "normal-form") return InitialMode::normal_form;
  if (s == "s1-coords") return InitialMode::s1_coords;
  if (s == "qpW") return InitialMode::qpW;
  if (s == "explicit") return InitialMode::explicit_state;
  throw ConfigError("initial.mode must be one of normal-form, s1-coords, qpW, explicit; got '" + s + "'");
}

Solver parse_solver(const std::string& s) {
  if (s == "rk4") return Solver::rk4;
  if (s == "exact") return Solver::exact;
  if (s == "both") return Solver::both;
  throw ConfigError("integrate.solver must be one of rk4, exact, both; got '" + s + "'");
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + s + "'");
}

// Pairs written as "1:1, 2:1" with one-based spin labels.
std::vector<std::pair<long, long>> parse_pairs(const std::string& text) {
  std::vector<std::pair<long, long>> out;
  for (const auto& p : split_list(text)) {
    std::vector<std::string> ab;
    boost::algorithm::split(ab, p, boost::algorithm::is_any_of(":"));
    if (ab.size() != 2) throw ConfigError("observables.pairs entries must look like a:b; got '" + p + "'");
    out.emplace_back(parse_scalar<long>("observables.pairs", ab[0]) - 1, parse_scalar<long>("observables.pairs", ab[1]) - 1);
  }
  return out;
}

const std::set<std::string> kKnownKeys = {
    "system.n",     "system.d",          "system.gamma",     "initial.mode",   "initial.random", "initial.y",
    "initial.q",    "initial.v_re",      "initial.v_im",     "integrate.h",    "integrate.T",    "integrate.sample_every",
    "integrate.solver", "observables.k", "observables.pairs", "rng.seed"};

}  // namespace

Config default_config() { return Config{}; }

Config load_config(const std::string& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  for (const auto& section : tree) {
    if (section.second.empty() && !section.second.data().empty()) throw ConfigError("key outside a section: " + section.first);
    for (const auto& kv : section.second) {
      const std::string key = section.first + "." + kv.first;
      if (!kKnownKeys.count(key)) throw ConfigError("unknown config key: " + key);
    }
  }
  Config c = default_config();
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(key)) return boost::algorithm::trim_copy(*v);
    return std::nullopt;
  };
  if (auto v = get("system.n")) c.n = parse_scalar<long>("system.n", *v);
  if (auto v = get("system.d")) c.d = parse_scalar<long>("system.d", *v);
  if (auto v = get("system.gamma")) c.gamma = parse_scalar<double>("system.gamma", *v);
  if (auto v = get("initial.mode")) c.mode = parse_mode(*v);
  if (auto v = get("initial.random")) c.random = parse_bool("initial.random", *v);
  if (auto v = get("initial.y")) c.y = parse_list<double>("initial.y", *v);
  if (auto v = get("initial.q")) c.q = parse_list<double>("initial.q", *v);
  if (auto v = get("initial.v_re")) c.v_re = parse_list<double>("initial.v_re", *v);
  if (auto v = get("initial.v_im")) c.v_im = parse_list<double>("initial.v_im", *v);
  if (auto v = get("integrate.h")) c.h = parse_scalar<double>("integrate.h", *v);
  if (auto v = get("integrate.T")) c.T = parse_scalar<double>("integrate.T", *v);
  if (auto v = get("integrate.sample_every")) c.sample_every = static_cast<int>(parse_scalar<long>("integrate.sample_every", *v));
  if (auto v = get("integrate.solver")) c.solver = parse_solver(*v);
  if (auto v = get("observables.k")) c.ks = parse_list<int>("observables.k", *v);
  if (auto v = get("observables.pairs")) c.pairs = parse_pairs(*v);
  if (auto v = get("rng.seed")) c.seed = parse_scalar<std::uint64_t>("rng.seed", *v);
  validate(c);
  return c;
}

void validate(const Config& c) {
  if (c.n < 1 || c.n > 16) throw ConfigError("system.n must lie in [1, 16]");
  if (c.d < 1 || c.d > 8) throw ConfigError("system.d must lie in [1, 8]");
  if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) throw ConfigError("system.gamma must be positive");
  if (!(c.h > 0.0 && c.h <= 1e-2)) throw ConfigError("integrate.h must lie in (0, 1e-2]");
  if (!(c.T >= 0.0) || !std::isfinite(c.T)) throw ConfigError("integrate.T must be non-negative");
  if (c.sample_every < 1) throw ConfigError("integrate.sample_every must be positive");
  if (c.ks.empty()) throw ConfigError("observables.k must not be empty");
  for (int k : c.ks)
    if (k < 0) throw ConfigError("observables.k entries must be non-negative");
  for (const auto& [a, b] : c.pairs)
    if (a < 0 || a >= c.d || b < 0 || b >= c.d) throw ConfigError("observables.pairs labels must lie in 1..d");
  if ((c.mode == InitialMode::s1_coords || c.mode == InitialMode::normal_form) && c.d < 2)
    throw ConfigError("initial.mode " + to_string(c.mode) + " requires d >= 2");
  if (c.mode == InitialMode::normal_form && !c.y.empty() && static_cast<long>(c.y.size()) != c.n)
    throw ConfigError("initial.y must have n entries");
  if (c.mode == InitialMode::explicit_state) {
    if (static_cast<long>(c.q.size()) != c.n) throw ConfigError("initial.q must have n entries");
    if (static_cast<long>(c.v_re.size()) != c.n * c.d) throw ConfigError("initial.v_re must have n*d entries");
    if (!c.v_im.empty() && static_cast<long>(c.v_im.size()) != c.n * c.d) throw ConfigError("initial.v_im must have n*d entries");
  }
}

std::string to_string(InitialMode m) {
  switch (m) {
    case InitialMode::normal_form: return "normal-form";
    case InitialMode::s1_coords: return "s1-coords";
    case InitialMode::qpW: return "qpW";
    case InitialMode::explicit_state: return "explicit";
  }
  return "?";
}

std::string to_string(Solver s) {
  switch (s) {
    case Solver::rk4: return "rk4";
    case Solver::exact: return "exact";
    case Solver::both: return "both";
  }
  return "?";
}

}  // namespace spinrs_cli
