#include "fibergap/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <yaml-cpp/yaml.h>

#include "fibergap/error.hpp"

namespace fibergap {

namespace {

const std::set<std::string> kExperiments{"invariant", "rates", "gap", "ly_check", "stability", "norms_selftest"};

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(fmt::format("'{}' must be a mapping", where));
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(fmt::format("unknown key '{}' in {}", key, where));
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(fmt::format("'{}' has an invalid value", key));
  }
}

std::vector<double> number_list(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence()) fail(fmt::format("'{}' must be a list", key));
  std::vector<double> v;
  for (const auto& x : node) v.push_back(scalar<double>(x, key));
  return v;
}

template <typename T>
void maybe(const YAML::Node& parent, const char* key, T& into) {
  if (const YAML::Node n = parent[key]) into = scalar<T>(n, key);
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  if (!kExperiments.count(c.experiment)) fail(fmt::format("unknown experiment '{}'", c.experiment));
  if (c.system.family != "doubling_affine" && c.system.family != "trivial_product" && c.system.family != "lorenz_cusp") {
    fail(fmt::format("unknown system family '{}'", c.system.family));
  }
  if (!(c.system.alpha > 0.0 && c.system.alpha < 1.0)) fail("system.alpha must lie in (0,1)");
  if (c.system.family == "lorenz_cusp" && !(c.system.kappa > 0.5 && c.system.kappa < 1.0)) {
    fail("system.kappa must lie in (1/2,1)");
  }
  if (c.system.q.empty()) fail("system.q needs at least one coefficient");
  if (c.n < 2) fail("grid.n must be >= 2");
  if (c.system.atom_budget < 1) fail("grid.atom_budget must be >= 1");
  if (!(c.system.eta >= 0.0 && c.system.eta < 0.1)) fail("grid.eta must lie in [0, 0.1)");
  if (!(c.p >= 1.0)) fail("norm.p must be >= 1");
  if (!(c.A1 > 0.0 && c.A1 <= 1.0)) fail("norm.A1 must lie in (0,1]");
  if (c.steps < 4) fail("iteration.steps must be >= 4");
  if (!(c.tol > 0.0)) fail("iteration.tol must be positive");
  if (c.n_max < 1) fail("iteration.n_max must be >= 1");
  if (c.k_max < 1 || c.k_max > 24) fail("iteration.k_max must lie in [1,24]");
  if (c.seeds < 1) fail("seeds must be >= 1");
  for (std::size_t i = 0; i < c.deltas.size(); ++i) {
    if (!(c.deltas[i] > 0.0)) fail("stability.deltas must be positive");
    if (i > 0 && !(c.deltas[i] < c.deltas[i - 1])) fail("stability.deltas must be sorted in descending order");
    if (c.deltas[i] > c.perturbation.delta_max) fail("stability.deltas exceed perturbation.delta_max");
  }
  if (c.experiment == "stability" && c.deltas.size() < 3) fail("stability needs at least 3 deltas");
  if (!(c.stability_tol > 0.0)) fail("stability.tol must be positive");
  if (c.stability_n_max < 1) fail("stability.n_max must be >= 1");
  if (c.perturbation.delta_max * std::abs(c.perturbation.s_amp) >= 1.0) {
    fail("perturbation.s_amp * delta_max must be < 1");
  }
  if (c.output.empty()) fail("output must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    fail(fmt::format("YAML parse error: {}", e.what()));
  }
  if (!root || !root.IsMap()) fail("config must be a mapping");
  check_keys(root, "config",
             {"experiment", "system", "grid", "norm", "iteration", "stability", "seeds", "rng_seed", "output"});

  ExperimentConfig c;
  if (!root["experiment"]) fail("missing 'experiment'");
  c.experiment = scalar<std::string>(root["experiment"], "experiment");

  std::string family = "doubling_affine";
  if (const YAML::Node s = root["system"]) {
    check_keys(s, "system", {"family", "kappa", "alpha", "q", "H"});
    maybe(s, "family", family);
  }
  if (family != "doubling_affine" && family != "trivial_product" && family != "lorenz_cusp") {
    fail(fmt::format("unknown system family '{}'", family));
  }
  c.system = default_spec(family);
  c.perturbation = default_perturbation(family);
  if (const YAML::Node s = root["system"]) {
    maybe(s, "kappa", c.system.kappa);
    maybe(s, "alpha", c.system.alpha);
    maybe(s, "H", c.system.H);
    if (s["q"]) c.system.q = number_list(s["q"], "system.q");
  }
  if (const YAML::Node g = root["grid"]) {
    check_keys(g, "grid", {"n", "atom_budget", "eta"});
    maybe(g, "n", c.n);
    maybe(g, "atom_budget", c.system.atom_budget);
    maybe(g, "eta", c.system.eta);
  }
  if (const YAML::Node nn = root["norm"]) {
    check_keys(nn, "norm", {"p", "A1"});
    maybe(nn, "p", c.p);
    maybe(nn, "A1", c.A1);
  }
  if (const YAML::Node it = root["iteration"]) {
    check_keys(it, "iteration", {"steps", "tol", "n_max", "k_max"});
    maybe(it, "steps", c.steps);
    maybe(it, "tol", c.tol);
    maybe(it, "n_max", c.n_max);
    maybe(it, "k_max", c.k_max);
  }
  if (const YAML::Node st = root["stability"]) {
    check_keys(st, "stability", {"deltas", "tol", "n_max", "perturbation"});
    if (st["deltas"]) c.deltas = number_list(st["deltas"], "stability.deltas");
    maybe(st, "tol", c.stability_tol);
    maybe(st, "n_max", c.stability_n_max);
    if (const YAML::Node pt = st["perturbation"]) {
      check_keys(pt, "stability.perturbation", {"s_amp", "w_amp", "v0", "v1", "delta_max"});
      maybe(pt, "s_amp", c.perturbation.s_amp);
      maybe(pt, "w_amp", c.perturbation.w_amp);
      maybe(pt, "v0", c.perturbation.v0);
      maybe(pt, "v1", c.perturbation.v1);
      maybe(pt, "delta_max", c.perturbation.delta_max);
    }
  }
  maybe(root, "seeds", c.seeds);
  maybe(root, "rng_seed", c.rng_seed);
  maybe(root, "output", c.output);
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  auto list = [](const std::vector<double>& v) { return fmt::format("[{}]", fmt::join(v, ", ")); };
  std::string out;
  out += fmt::format("experiment: {}\n", c.experiment);
  out += "system:\n";
  out += fmt::format("  family: {}\n", c.system.family);
  out += fmt::format("  kappa: {}\n", c.system.kappa);
  out += fmt::format("  alpha: {}\n", c.system.alpha);
  out += fmt::format("  q: {}\n", list(c.system.q));
  if (c.system.H >= 0.0) out += fmt::format("  H: {}\n", c.system.H);
  out += "grid:\n";
  out += fmt::format("  n: {}\n  atom_budget: {}\n  eta: {}\n", c.n, c.system.atom_budget, c.system.eta);
  out += fmt::format("norm:\n  p: {}\n  A1: {}\n", c.p, c.A1);
  out += fmt::format("iteration:\n  steps: {}\n  tol: {}\n  n_max: {}\n  k_max: {}\n", c.steps, c.tol, c.n_max,
                     c.k_max);
  out += "stability:\n";
  out += fmt::format("  deltas: {}\n  tol: {}\n  n_max: {}\n", list(c.deltas), c.stability_tol, c.stability_n_max);
  out += fmt::format("  perturbation:\n    s_amp: {}\n    w_amp: {}\n    v0: {}\n    v1: {}\n    delta_max: {}\n",
                     c.perturbation.s_amp, c.perturbation.w_amp, c.perturbation.v0, c.perturbation.v1,
                     c.perturbation.delta_max);
  out += fmt::format("seeds: {}\nrng_seed: {}\noutput: \"{}\"\n", c.seeds, c.rng_seed, c.output);
  return out;
}

}  // namespace fibergap
