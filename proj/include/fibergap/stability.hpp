#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fibergap/spectral.hpp"
#include "fibergap/systems.hpp"

namespace fibergap {

// sigma_delta(x) = x + delta*s_amp*x(1-x), T_delta = T_0 o sigma_delta,
// G_delta = G_0 + delta*w_amp*(v0 + v1*y).
struct PerturbationSpec {
  double s_amp = 0.0;
  double w_amp = 0.0;
  double v0 = 0.0;
  double v1 = 0.0;
  double delta_max = 0.25;

  bool operator==(const PerturbationSpec&) const = default;
};

// Family presets: trivial_product shifts fibers by delta (invariant fiber
// delta_{2 delta}); lorenz_cusp conjugates the base and tilts the fibers.
PerturbationSpec default_perturbation(const std::string& family);

class PerturbationFamily {
 public:
  PerturbationFamily(SystemSpec base, PerturbationSpec pert);

  const SystemSpec& base_spec() const noexcept { return base_; }
  const PerturbationSpec& perturbation() const noexcept { return pert_; }

  Conjugator sigma(double delta) const;
  // NotDiffeomorphism if sigma' <= 0 on the check grid.
  FiberSystem member(double delta) const;

 private:
  SystemSpec base_;
  PerturbationSpec pert_;
};

// max(sup|sigma - id|, sup|1/sigma' - 1|) on a fine grid.
double skorokhod_bound(const PerturbationFamily& family, double delta);

// ||(F0* - Fd*) f||_1 on a shared grid.
double discrepancy(const TransferOperator& op0, const TransferOperator& op_delta, const DisintegratedMeasure& f);

struct StabilityRow {
  double delta = 0.0;
  double l1_diff = 0.0;
  double var_fdelta = 0.0;
  double discrepancy = 0.0;
  double residual = 0.0;
  int steps = 0;
  bool converged = false;
};

struct StabilityOptions {
  std::size_t n = 128;
  double tol = 2.5e-4;
  int n_max = 400;
};

struct StabilityCurve {
  std::vector<StabilityRow> rows;  // in the given delta order
  DisintegratedMeasure f0;
  std::vector<DisintegratedMeasure> f_delta;
  double f0_residual = 0.0;
  bool f0_converged = false;
};

// Deltas must be positive and sorted descending (BadInput otherwise).
StabilityCurve stability_curve(const PerturbationFamily& family, const std::vector<double>& deltas,
                               const StabilityOptions& opts);

void write_stability_csv(const std::vector<StabilityRow>& rows, const std::string& path);

struct ModulusFit {
  double c1 = 0.0;
  double c2 = 0.0;
  double quality = 0.0;  // ||residual|| / ||y||
  double predict(double delta) const;
};

// Nonnegative least squares for y ~ c1*delta|log delta| + c2*delta.
ModulusFit fit_modulus(const std::vector<StabilityRow>& rows);

struct UniformVarBound {
  double max_var = 0.0;
  double C0_bar = 0.0;
  std::vector<double> C0_per_delta;
};

struct LyPerDelta {
  double delta;
  int k;
  double beta;
  double K2;
  double K3;
  double C0;
  double var_diamond;
};

// LY data and C0 for one member (k chosen by select_iterate).
LyPerDelta member_constants(const PerturbationFamily& family, double delta, std::size_t n, double p, double A1);

UniformVarBound uniform_var_bound(const PerturbationFamily& family, const StabilityCurve& curve,
                                  const std::vector<double>& deltas, std::size_t n, double p, double A1);

struct ChecklistRow {
  double delta;
  double M;              // ||f_delta||_S1 (UF1)
  double skorokhod;      // UBV2
  double skorokhod_cap;  // slope * delta
  double g_shift;        // sampled sup |G0 - G_delta| (UBV3)
  double lambda1;        // expansion of T_delta (UBV4)
  double est1;           // at the delta = 0 iterate (UBV1)
  double weak_ratio;     // max ||F* mu||_1 / ||mu||_1 on random signed mu (UF4)
};

struct ChecklistReport {
  std::vector<ChecklistRow> rows;
  std::vector<std::string> failures;
};

// Throws ChecklistFailure naming the violated items unless collect_only.
ChecklistReport uf_checklist(const PerturbationFamily& family, const std::vector<double>& deltas, std::size_t n,
                             double tol, int n_max, bool collect_only = false);

}  // namespace fibergap
