#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fibergap/measures.hpp"

namespace fibergap {

class Rng;

struct SelftestRow {
  std::string check;
  std::size_t cases = 0;
  double max_error = 0.0;  // worst observed violation measure for the check
  double bound = 0.0;
  bool pass = false;
};

struct SelftestOptions {
  std::size_t cases = 1000;
  std::size_t grid_n = 1024;
  std::uint64_t seed = 20240601;
};

// Random signed atomic measure: 1..max_atoms atoms, positions in [0,1],
// signed weights in (-1,1).
SignedAtoms random_atoms(Rng& rng, std::size_t max_atoms = 12);
AtomList random_positive_atoms(Rng& rng, std::size_t max_atoms, double total_mass);

// Chain LP vs grid DP oracle, equal-mass CDF formula vs LP, and the
// seminorm properties (triangle, homogeneity, mass/TV sandwich).
std::vector<SelftestRow> norm_selftest(const SelftestOptions& opts = {});

void write_selftest_csv(const std::vector<SelftestRow>& rows, const std::string& path);

}  // namespace fibergap
