#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fibergap/fibered_measures.hpp"

namespace fibergap {

struct StepDiagnostics {
  int step = 0;
  double norm_l1 = 0.0;
  double norm_linf = 0.0;
  double var = 0.0;
  double s1 = 0.0;
  std::size_t atoms_total = 0;
  std::size_t singular_preimages = 0;
  double eta_used = 0.0;  // largest merge radius needed to respect the atom budget
};

// F* on a fixed base grid. Each image cell gathers the exact preimage
// pieces of the cell; a piece of length l inside source cell c contributes
// (phi_c l / h) * push(pi_c, G(x_piece, .)), x_piece the piece midpoint.
class TransferOperator {
 public:
  TransferOperator(FiberSystem F, std::size_t n);

  std::size_t n() const noexcept { return plan_.n; }
  const FiberSystem& system() const noexcept { return F_; }
  const PreimagePlan& plan() const noexcept { return plan_; }
  // Image-cell midpoints whose inverse-branch list had singular entries.
  std::size_t singular_count() const noexcept { return singular_; }

  // One step, compacting fibers with radius eta (doubled as needed, up to
  // 1024*eta, to stay within the atom budget).
  DisintegratedMeasure apply(const DisintegratedMeasure& mu, double eta, double* eta_used = nullptr) const;
  DisintegratedMeasure apply(const DisintegratedMeasure& mu) const { return apply(mu, F_.eta); }

 private:
  FiberSystem F_;
  PreimagePlan plan_;
  std::size_t singular_ = 0;
};

DisintegratedMeasure transfer_once(const FiberSystem& F, const DisintegratedMeasure& mu);

struct TransferRun {
  DisintegratedMeasure measure;
  std::vector<StepDiagnostics> diagnostics;  // steps 0..n
};

StepDiagnostics diagnose(const DisintegratedMeasure& mu, int step, std::size_t singular, double eta_used);

TransferRun transfer_n(const TransferOperator& op, const DisintegratedMeasure& mu, int n, double eta,
                       bool with_diagnostics = true);
TransferRun transfer_n(const FiberSystem& F, const DisintegratedMeasure& mu, int n, double eta,
                       bool with_diagnostics = true);

void write_diagnostics_csv(const std::vector<StepDiagnostics>& diag, const std::string& path);

}  // namespace fibergap
