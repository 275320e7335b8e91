#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fibergap/transfer.hpp"

namespace fibergap {

struct InvariantResult {
  DisintegratedMeasure measure;
  double residual = 0.0;  // ||F* mu - mu||_1 of the returned measure
  int steps = 0;
  bool converged = false;
  std::vector<double> increments;  // ||mu_{k+1} - mu_k||_1 along the iteration
};

// Iterates from Lebesgue x 32 uniform atoms until the increment drops
// below tol; returns mu_k whose increment was < tol.
InvariantResult invariant_measure(const TransferOperator& op, double tol, int n_max);
InvariantResult invariant_measure(const TransferOperator& op, const DisintegratedMeasure& start, double tol,
                                  int n_max);

struct EquilibriumRate {
  double beta1_hat = 0.0;
  double D2_hat = 0.0;
  std::vector<std::vector<double>> norms;  // per seed, ||F*^k mu||_1 for k = 0..n
};

// Geometric fit of ||F*^k mu||_1 over [n/2, n]; PreconditionFailed for seeds
// with nonzero mass, NotDecaying when the fitted ratio is >= 1.
EquilibriumRate equilibrium_rate(const TransferOperator& op, const std::vector<DisintegratedMeasure>& seeds, int n);

// ---------------------------------------------------------------------------

enum class Provenance { kMeasured, kFormula, kConfigured };
std::string provenance_name(Provenance p);

struct LedgerEntry {
  std::string key;
  double value;
  Provenance provenance;
};

class ConstantLedger {
 public:
  void set(const std::string& key, double value, Provenance p);
  bool has(const std::string& key) const;
  double get(const std::string& key) const;  // BadInput if missing
  const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }

  // "key = value [provenance]" lines in insertion order.
  std::string serialize() const;
  static ConstantLedger parse(const std::string& text);
  void write(const std::string& path) const;

 private:
  std::vector<LedgerEntry> entries_;
};

struct GapInputs {
  double alpha = 0.0;
  double r = 0.0;
  double D = 1.0;
  double beta0 = 0.0;
  double C = 0.0;
  int k = 1;
  double M1 = 1.0;
  double p = 1.0;
  double A1 = 0.25;
  double mu0_s1_norm = 0.0;
};

// Completes the ledger with the gap constant chain:
// lambda, A, B3, Cbar, B2, alpha_bar, beta1, D2, lambda0, xi, K1, K,
// beta2, C2, alpha1, H_N, A1_prime, B4, K2.
ConstantLedger gap_constants(const GapInputs& in);

// Recomputes every formula entry from the measured/configured ones.
ConstantLedger recompute(const ConstantLedger& ledger);

struct BranchData {
  double sup_g;
  double var_g;
  double length;
};

// One-step branch data of the base map (sup and variation of g_i on the
// closed branch domain, sampled).
std::vector<BranchData> branch_data(const PiecewiseExpandingMap& map, std::size_t samples = 4097);

// K3 = max sup g_i * var_diamond(G) + max (var g_i + 2 sup g_i)/m(P_i);
// C0 = max{1, K3 * max{K2, 1}/(1 - beta)}.
double k3_constant(const std::vector<BranchData>& branches, double var_diamond_G);
double c0_constant(double K3, double K2, double beta);

struct GapDecayReport {
  double max_ratio = 0.0;
  struct Violation {
    std::size_t seed;
    int step;
    double ratio;
  };
  std::vector<Violation> violations;
  std::vector<std::vector<double>> s1_norms;  // per seed, steps 0..n
  std::vector<std::vector<double>> ratios;
};

GapDecayReport verify_gap_decay(const TransferOperator& op, double xi, double K,
                                const std::vector<DisintegratedMeasure>& seeds, int n, double slack = 0.0);

}  // namespace fibergap
