#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace fibergap {

struct PointMass {
  double pos;
  double weight;
};

using AtomList = std::vector<PointMass>;

// Signed atomic measure on [0,1]; mu = plus - minus with positive weights in
// both parts.
struct SignedAtoms {
  AtomList plus;
  AtomList minus;

  // Sign of `weight` selects the part; zero weights are ignored.
  void add(double pos, double weight);

  double plus_mass() const;
  double minus_mass() const;
  double signed_mass() const { return plus_mass() - minus_mass(); }
  double total_variation() const { return plus_mass() + minus_mass(); }
  std::size_t size() const { return plus.size() + minus.size(); }
  bool empty() const { return plus.empty() && minus.empty(); }

  SignedAtoms scaled(double c) const;
  // Throws BadInput on positions outside [0,1] or non-positive weights.
  void validate() const;
};

SignedAtoms operator-(const SignedAtoms& a, const SignedAtoms& b);
SignedAtoms operator+(const SignedAtoms& a, const SignedAtoms& b);

double mass(const AtomList& atoms);

// One term coef * atoms of a signed combination.
struct AtomTerm {
  const AtomList* atoms;
  double coef;
};

// W-norm (bounded-Lipschitz dual) of sum_k coef_k * atoms_k, solved exactly as
// a chain LP over the sorted atom positions.
double bl_norm(const std::vector<AtomTerm>& terms);
double bl_norm(const SignedAtoms& mu);

// Same LP from (position, signed coefficient) pairs, any order.
double bl_norm_points(std::vector<PointMass> points);

// int_0^1 |F_mu - F_nu| for positive measures of equal mass.
double bl_distance_equal_mass(const SignedAtoms& mu, const SignedAtoms& nu);

// Independent verifier: lattice dynamic program on grid_n positions.
double bl_norm_oracle(const SignedAtoms& mu, std::size_t grid_n);

// Positions mapped through g; RangeViolation beyond 1e-12 outside [0,1].
SignedAtoms push_forward(const SignedAtoms& mu, const std::function<double(double)>& g);
AtomList push_forward(const AtomList& atoms, const std::function<double(double)>& g);

// Greedy same-sign merge: clusters spanning at most eta collapse to their
// weighted mean. Output sorted by position.
AtomList compact_atoms(AtomList atoms, double eta);
SignedAtoms compact_atoms(const SignedAtoms& mu, double eta);

void write_atoms_csv(const SignedAtoms& mu, const std::string& path);
SignedAtoms read_atoms_csv(const std::string& path);

}  // namespace fibergap
