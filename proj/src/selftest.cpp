#include "fibergap/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "fibergap/error.hpp"
#include "fibergap/parallel.hpp"
#include "fibergap/rng.hpp"

namespace fibergap {

SignedAtoms random_atoms(Rng& rng, std::size_t max_atoms) {
  SignedAtoms mu;
  const std::size_t k = 1 + rng.index(max_atoms);
  for (std::size_t i = 0; i < k; ++i) {
    const double pos = rng.uniform();
    double w = rng.uniform(-1.0, 1.0);
    if (w == 0.0) w = 0.5;
    mu.add(pos, w);
  }
  return mu;
}

AtomList random_positive_atoms(Rng& rng, std::size_t max_atoms, double total_mass) {
  const std::size_t k = 1 + rng.index(max_atoms);
  AtomList out;
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({rng.uniform(), 0.05 + rng.uniform()});
    s += out.back().weight;
  }
  for (PointMass& a : out) a.weight *= total_mass / s;
  return out;
}

namespace {

template <typename Fn>
SelftestRow run_cases(const std::string& name, std::size_t cases, std::uint64_t seed, double bound, Fn&& fn) {
  // Each case draws from its own stream so results ignore the worker count.
  std::vector<double> err(cases, 0.0);
  parallel_for(cases, [&](std::size_t i) {
    Rng rng(seed + 7919 * static_cast<std::uint64_t>(i));
    err[i] = fn(rng);
  });
  SelftestRow row{name, cases, 0.0, bound, false};
  for (double e : err) row.max_error = std::max(row.max_error, e);
  row.pass = row.max_error <= bound;
  return row;
}

}  // namespace

std::vector<SelftestRow> norm_selftest(const SelftestOptions& o) {
  std::vector<SelftestRow> rows;
  const double gn = static_cast<double>(o.grid_n);

  // Error normalised by the oracle tolerance 2*TV/grid_n, so the bound is 1.
  rows.push_back(run_cases("lp_vs_dp_oracle", o.cases, o.seed, 1.0, [&](Rng& rng) {
    const SignedAtoms mu = random_atoms(rng);
    const double tv = mu.total_variation();
    return std::abs(bl_norm(mu) - bl_norm_oracle(mu, o.grid_n)) / (2.0 * tv / gn);
  }));

  rows.push_back(run_cases("cdf_vs_lp", o.cases, o.seed + 1, 1e-9, [&](Rng& rng) {
    const double m = 0.1 + 2.0 * rng.uniform();
    SignedAtoms a, b;
    a.plus = random_positive_atoms(rng, 10, m);
    b.plus = random_positive_atoms(rng, 10, m);
    // Match masses exactly after rescaling round-off.
    b.plus.back().weight += a.plus_mass() - b.plus_mass();
    const double cdf = bl_distance_equal_mass(a, b);
    const double lp = bl_norm(std::vector<AtomTerm>{{&a.plus, 1.0}, {&b.plus, -1.0}});
    return std::abs(cdf - lp);
  }));

  rows.push_back(run_cases("triangle", o.cases, o.seed + 2, 1e-12, [&](Rng& rng) {
    const SignedAtoms a = random_atoms(rng);
    const SignedAtoms b = random_atoms(rng);
    return std::max(0.0, bl_norm(a + b) - bl_norm(a) - bl_norm(b));
  }));

  rows.push_back(run_cases("homogeneity", o.cases, o.seed + 3, 1e-12, [&](Rng& rng) {
    const SignedAtoms a = random_atoms(rng);
    const double c = rng.uniform(-3.0, 3.0);
    const double n = bl_norm(a);
    return std::abs(bl_norm(a.scaled(c)) - std::abs(c) * n) / std::max(1.0, std::abs(c) * n);
  }));

  rows.push_back(run_cases("mass_tv_sandwich", o.cases, o.seed + 4, 1e-12, [&](Rng& rng) {
    const SignedAtoms a = random_atoms(rng);
    const double n = bl_norm(a);
    return std::max({0.0, std::abs(a.signed_mass()) - n, n - a.total_variation()});
  }));
  return rows;
}

void write_selftest_csv(const std::vector<SelftestRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << "check,cases,max_error,bound,pass\n";
  for (const SelftestRow& r : rows) {
    os << fmt::format("{},{},{},{},{}\n", r.check, r.cases, r.max_error, r.bound, r.pass ? 1 : 0);
  }
}

}  // namespace fibergap
