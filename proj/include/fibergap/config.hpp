#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fibergap/stability.hpp"
#include "fibergap/systems.hpp"

namespace fibergap {

// YAML layout (all sections optional except `experiment`):
//
//   experiment: stability        # invariant|rates|gap|ly_check|stability|norms_selftest
//   system:    {family, kappa, alpha, q: [c0, c1, ...], H}
//   grid:      {n, atom_budget, eta}
//   norm:      {p, A1}
//   iteration: {steps, tol, n_max, k_max}
//   stability: {deltas: [...], tol, n_max, perturbation: {s_amp, w_amp, v0, v1, delta_max}}
//   seeds: 5
//   rng_seed: 12345
//   output: out/run
//
// Unknown keys are rejected.
struct ExperimentConfig {
  std::string experiment;
  SystemSpec system = default_spec("doubling_affine");
  std::size_t n = 64;
  double p = 1.0;
  double A1 = 0.25;
  int steps = 12;
  double tol = 1e-4;
  int n_max = 200;
  int k_max = 12;
  std::vector<double> deltas;
  double stability_tol = 2.5e-4;
  int stability_n_max = 400;
  PerturbationSpec perturbation;
  std::size_t seeds = 5;
  std::uint64_t rng_seed = 12345;
  std::string output = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

// Parse and validate; ConfigError on any problem.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

}  // namespace fibergap
