#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fibergap/interval_dynamics.hpp"
#include "fibergap/measures.hpp"

namespace fibergap {

// Cell j of a disintegrated measure: restriction phi_plus*pi_plus -
// phi_minus*pi_minus, with pi_plus and pi_minus probabilities.
struct FiberCell {
  double phi_plus = 0.0;
  double phi_minus = 0.0;
  AtomList pi_plus;
  AtomList pi_minus;
};

// Uniform probability on 8 midpoint atoms; stands in for the fiber of a
// zero-weight cell.
const AtomList& canonical_fiber();
AtomList uniform_atoms(std::size_t k);
AtomList dirac(double c);

class DisintegratedMeasure {
 public:
  DisintegratedMeasure() = default;
  explicit DisintegratedMeasure(std::vector<FiberCell> cells, double p = 1.0, double A1 = 0.25)
      : cells_(std::move(cells)), p_(p), A1_(A1) {}

  std::size_t size() const noexcept { return cells_.size(); }
  const FiberCell& cell(std::size_t j) const { return cells_.at(j); }
  FiberCell& cell(std::size_t j) { return cells_.at(j); }
  const std::vector<FiberCell>& cells() const noexcept { return cells_; }
  double p() const noexcept { return p_; }
  double A1() const noexcept { return A1_; }
  void set_norm_params(double p, double A1) {
    p_ = p;
    A1_ = A1;
  }

  SignedAtoms restriction(std::size_t j) const;
  GridDensity marginal() const;
  double total_mass() const;
  double total_variation_mass() const;
  std::size_t atom_count() const;

  // Checks finiteness, positions in [0,1] and fiber masses (1e-9).
  void validate() const;

 private:
  std::vector<FiberCell> cells_;
  double p_ = 1.0;
  double A1_ = 0.25;
};

using FiberSampler = std::function<AtomList(std::size_t cell)>;

// Splits phi into positive and negative parts, both carrying sampler(j).
// With require_positive, negative cells raise BadDensity.
DisintegratedMeasure from_product(const GridDensity& phi, const FiberSampler& sampler,
                                  bool require_positive = false);
DisintegratedMeasure from_parts(const GridDensity& phi_plus, const GridDensity& phi_minus,
                                const FiberSampler& plus, const FiberSampler& minus);

DisintegratedMeasure lebesgue_square(std::size_t n, std::size_t atoms = 32, double p = 1.0, double A1 = 0.25);
DisintegratedMeasure lebesgue_times_dirac(std::size_t n, double c, double p = 1.0, double A1 = 0.25);

// ca*a + cb*b on a shared grid, fibers merged exactly (duplicates combined).
DisintegratedMeasure linear_combination(const DisintegratedMeasure& a, double ca, const DisintegratedMeasure& b,
                                        double cb);

double cell_norm(const DisintegratedMeasure& mu, std::size_t j);
// Norms of a - b without materialising the difference.
double distance_L1(const DisintegratedMeasure& a, const DisintegratedMeasure& b);
double distance_Linf(const DisintegratedMeasure& a, const DisintegratedMeasure& b);
double distance_S1(const DisintegratedMeasure& a, const DisintegratedMeasure& b);
double norm_weak_L1(const DisintegratedMeasure& mu);
double norm_Linf(const DisintegratedMeasure& mu);
double norm_S1(const DisintegratedMeasure& mu);
double norm_Sinf(const DisintegratedMeasure& mu);

// sum over consecutive cells first..last (inclusive) of the W-distance of
// neighbouring restrictions.
double path_variation(const DisintegratedMeasure& mu);
double path_variation(const DisintegratedMeasure& mu, std::size_t first, std::size_t last);

struct VarDiamond {
  double sampled;    // best nondecreasing y-sequence on the grid
  double surrogate;  // sum_i max_y |G(x_{i+1},y) - G(x_i,y)|
};

VarDiamond var_diamond(const std::function<double(double, double)>& G, const std::vector<double>& xs,
                       const std::vector<double>& ys);

class Rng;
// Random BV marginal (piecewise constant, 1..8 jumps, values in [0.2,2])
// normalised to mass 1, fibers of 1..atoms random atoms.
DisintegratedMeasure random_probability_measure(std::size_t n, Rng& rng, std::size_t atoms = 8, double p = 1.0,
                                                double A1 = 0.25);
// Difference of two independent random probability measures.
DisintegratedMeasure random_zero_mass_measure(std::size_t n, Rng& rng, std::size_t atoms = 8, double p = 1.0,
                                              double A1 = 0.25);
// Random signed measure with independent random positive and negative parts.
DisintegratedMeasure random_signed_measure(std::size_t n, Rng& rng, std::size_t atoms = 8, double p = 1.0,
                                           double A1 = 0.25);

// Uniform grids helper for var_diamond.
std::vector<double> linspace(double a, double b, std::size_t count);

void write_measure_csv(const DisintegratedMeasure& mu, const std::string& path);
DisintegratedMeasure read_measure_csv(const std::string& path, double p = 1.0, double A1 = 0.25);

// ---------------------------------------------------------------------------

struct FiberSystem {
  std::string name;
  PiecewiseExpandingMap base;
  std::function<double(double, double)> G;
  double alpha;
  double H;
  std::size_t atom_budget = 4096;
  double eta = 1e-5;
};

struct FiberSystemCheck {
  double max_vertical_ratio = 0.0;    // sampled |dG/dy| bound
  double max_horizontal_ratio = 0.0;  // sampled |dG/dx| bound within branches
  bool ok = false;
};

// Sampled vertical contraction / horizontal Lipschitz checks; BadInput on violation when
// `throw_on_failure`.
FiberSystemCheck check_fiber_system(const FiberSystem& F, std::size_t samples = 64, bool throw_on_failure = true);

}  // namespace fibergap
