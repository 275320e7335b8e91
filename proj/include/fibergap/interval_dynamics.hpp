#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fibergap {

// One monotone piece of a piecewise expanding map. The callables are
// evaluated on the closed domain [lo, hi]; derivative may be infinite at
// an endpoint (cusp maps).
struct Branch {
  double lo = 0.0;
  double hi = 1.0;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::function<double(double)> inverse;
};

struct BranchPoint {
  std::size_t branch;
  double value;
  double derivative;
};

struct Preimage {
  double x;
  double g;  // 1 / |T'(x)|
  std::size_t branch;
};

struct InverseBranches {
  std::vector<Preimage> entries;
  std::size_t dropped_singular = 0;
};

class PiecewiseExpandingMap {
 public:
  // Validates cover of [0,1], strict monotonicity and inverse consistency
  // (1e-12 on interior samples). Expansion is checked separately by
  // check_expansion, so non-expanding stubs can still be built.
  PiecewiseExpandingMap(std::string name, std::vector<Branch> branches);

  const std::string& name() const noexcept { return name_; }
  std::size_t branch_count() const noexcept { return branches_.size(); }
  const Branch& branch(std::size_t i) const { return branches_.at(i); }
  bool increasing(std::size_t i) const { return increasing_.at(i); }
  // Closure of T_i(P_i).
  double image_lo(std::size_t i) const { return image_lo_.at(i); }
  double image_hi(std::size_t i) const { return image_hi_.at(i); }
  bool singular_endpoints() const noexcept { return singular_; }

  BranchPoint branch_at(double x) const;
  InverseBranches inverse_branches(double y) const;

  // 1/|T_i'(x)| on the closed branch domain; 0 where the derivative blows up.
  double g(std::size_t branch, double x) const;

 private:
  std::string name_;
  std::vector<Branch> branches_;
  std::vector<bool> increasing_;
  std::vector<double> image_lo_;
  std::vector<double> image_hi_;
  bool singular_ = false;
};

PiecewiseExpandingMap doubling_map();
// T(x) = 1 - (1-2x)^kappa on (0,1/2), (2x-1)^kappa on (1/2,1).
PiecewiseExpandingMap lorenz_cusp_map(double kappa);
// Non-expanding single-branch identity, useful as a negative control.
PiecewiseExpandingMap identity_map();

struct Conjugator {
  std::function<double(double)> sigma;
  std::function<double(double)> sigma_prime;
  std::function<double(double)> sigma_inverse;
};

// T o sigma, with branch domains pulled back through sigma.
PiecewiseExpandingMap conjugated_map(const PiecewiseExpandingMap& base, const Conjugator& sigma,
                                     std::string name);

struct ExpansionReport {
  int n0 = 0;
  double lambda1 = 0.0;
  bool expanding = false;
};

ExpansionReport check_expansion(const PiecewiseExpandingMap& map, int n0_max = 8,
                                std::size_t samples_per_branch = 512);

// ---------------------------------------------------------------------------
// Densities on the uniform partition of [0,1].

struct GridDensity {
  std::vector<double> values;  // cell averages
  double p = 1.0;              // variation exponent for |.|_{1,1/p}
  double A1 = 0.25;            // oscillation-scale cap

  GridDensity() = default;
  explicit GridDensity(std::vector<double> v, double p_ = 1.0, double A1_ = 0.25)
      : values(std::move(v)), p(p_), A1(A1_) {}

  std::size_t size() const noexcept { return values.size(); }
  double cell_width() const { return 1.0 / static_cast<double>(values.size()); }
  double midpoint(std::size_t i) const { return (static_cast<double>(i) + 0.5) * cell_width(); }
};

// Half-open cells [i/n, (i+1)/n), last cell closed.
std::size_t cell_of(double x, std::size_t n);

double integral(const GridDensity& phi);
double l1_norm(const GridDensity& phi);

// Cell averages of f estimated from `subsamples` evenly spaced points per cell.
GridDensity grid_from_function(std::size_t n, const std::function<double(double)>& f,
                               double p = 1.0, double A1 = 0.25, std::size_t subsamples = 16);

void write_density_csv(const GridDensity& phi, const std::string& path);
GridDensity read_density_csv(const std::string& path, double p = 1.0, double A1 = 0.25);

// Exact preimage geometry of the image cells: for every image cell j the
// pieces T_i^{-1}(J_j) split along source cell boundaries.
struct PreimagePiece {
  std::uint32_t source;
  std::uint32_t branch;
  double x_lo;
  double x_hi;
};

struct PreimagePlan {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;  // CSR: pieces of target j in [offsets[j], offsets[j+1])
  std::vector<PreimagePiece> pieces;
};

PreimagePlan build_preimage_plan(const PiecewiseExpandingMap& map, std::size_t n);

enum class Reconstruction {
  kConstant,  // piecewise constant cells
  kLinear,    // minmod-limited linear slopes, cell averages preserved
};

// Perron-Frobenius operator on cell averages, integrating the source
// reconstruction exactly over each preimage piece. Conserves mass exactly
// and preserves nonnegativity for either reconstruction.
GridDensity pf_density(const PiecewiseExpandingMap& map, const GridDensity& phi,
                       Reconstruction recon = Reconstruction::kLinear);
GridDensity pf_density(const PreimagePlan& plan, const GridDensity& phi,
                       Reconstruction recon = Reconstruction::kLinear);

// Pointwise form sum_i phi(T_i^{-1} y) g_i(T_i^{-1} y) at cell midpoints,
// source values by cell lookup. Not mass conservative near singular points.
GridDensity pf_density_midpoint(const PiecewiseExpandingMap& map, const GridDensity& phi,
                                std::size_t* dropped_singular = nullptr);

// Row-stochastic Ulam matrix (row-major n*n), built from the forward map
// by bisection; independent of the inverse-branch callables.
std::vector<double> ulam_matrix(const PiecewiseExpandingMap& map, std::size_t n);
GridDensity apply_ulam_transpose(const std::vector<double>& ulam, const GridDensity& phi);

// ---------------------------------------------------------------------------
// Keller's generalized variation.

double osc1(const GridDensity& phi, double eps);
double var_1_1p(const GridDensity& phi, double p, double A1);
// |phi|_{1,1/p} = var_{1,1/p}(phi) + |phi|_1, using phi.p and phi.A1.
double strong_norm(const GridDensity& phi);

// ---------------------------------------------------------------------------
// Lasota-Yorke constants of the base.

struct CylinderReport {
  std::vector<std::uint32_t> word;
  double lo;
  double hi;
  double sup_g;
  double var_g;
};

struct Est1Result {
  int k = 0;
  double est1 = 0.0;  // max over k-cylinders of var g + 3 sup g
  std::vector<CylinderReport> cylinders;
};

inline constexpr double kMaxCylinders = 1e6;

Est1Result est1_quantity(const PiecewiseExpandingMap& map, int k,
                         std::size_t samples_per_cylinder = 257);

// Smallest k <= k_max with est1 < 1, or throws InsufficientIterate.
int select_iterate(const PiecewiseExpandingMap& map, int k_max = 16);

std::vector<GridDensity> test_density_library(std::size_t n, double p, double A1);

struct LyBaseConstants {
  int k = 0;
  double est1 = 0.0;
  double beta0 = 0.0;
  double C = 0.0;
  double M1 = 1.0;  // max |P^r f|_s / |f|_s over r < k on the library
  std::vector<CylinderReport> cylinders;
};

struct LyOptions {
  std::size_t n = 256;
  double p = 1.0;
  double A1 = 0.25;
  Reconstruction recon = Reconstruction::kLinear;
};

LyBaseConstants ly_base_constants(const PiecewiseExpandingMap& map, int k, const LyOptions& opts = {});

// ---------------------------------------------------------------------------
// Convergence to equilibrium on the base.

struct RateEstimate {
  double r = 0.0;
  double D = 0.0;
  double fit_residual = 0.0;
  std::vector<std::vector<double>> norms;  // per seed, steps 0..n_max
};

// Least-squares fit of log |P^n phi|_s over steps [n_max/2, n_max].
// Throws NotDecaying when the fitted ratio is >= 1.
RateEstimate base_convergence_rate(const PiecewiseExpandingMap& map, const std::vector<GridDensity>& seeds,
                                   int n_max, Reconstruction recon = Reconstruction::kLinear);

// Slope/intercept fit of log(values[k]) on k over [first, last].
struct LogLinearFit {
  double ratio = 0.0;
  double log_prefactor = 0.0;
  double rms_residual = 0.0;
};
LogLinearFit fit_geometric(const std::vector<double>& values, std::size_t first, std::size_t last);

// fit_geometric over [first, last] cut short where values fall below
// rel_floor * max(values) (round-off territory). Empty when fewer than 3
// points remain: the sequence died out faster than any geometric rate.
std::optional<LogLinearFit> fit_decay(const std::vector<double>& values, std::size_t first, std::size_t last,
                                      double rel_floor = 1e-11);

}  // namespace fibergap
