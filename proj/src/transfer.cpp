#include "fibergap/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "fibergap/error.hpp"
#include "fibergap/parallel.hpp"

namespace fibergap {

namespace {
constexpr double kMaxEtaGrowth = 1024.0;
}

TransferOperator::TransferOperator(FiberSystem F, std::size_t n) : F_(std::move(F)) {
  if (n < 2) throw Error(ErrorCode::kBadInput, "transfer grid needs at least 2 cells");
  plan_ = build_preimage_plan(F_.base, n);
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (F_.base.inverse_branches((static_cast<double>(j) + 0.5) * h).dropped_singular > 0) ++singular_;
  }
}

namespace {

// Compact with eta, doubling until the fiber fits the budget.
AtomList compact_to_budget(AtomList atoms, double eta, std::size_t budget, double& eta_used) {
  double r = eta;
  AtomList out = compact_atoms(std::move(atoms), r);
  while (out.size() > budget) {
    r = r > 0.0 ? 2.0 * r : 1e-12;
    if (r > kMaxEtaGrowth * std::max(eta, 1e-12)) {
      throw Error(ErrorCode::kAtomBudgetExceeded,
                  fmt::format("fiber keeps {} atoms (> {}) at merge radius {}", out.size(), budget, r));
    }
    out = compact_atoms(std::move(out), r);
  }
  eta_used = std::max(eta_used, r);
  return out;
}

}  // namespace

DisintegratedMeasure TransferOperator::apply(const DisintegratedMeasure& mu, double eta, double* eta_used) const {
  const std::size_t n = plan_.n;
  if (mu.size() != n) {
    throw Error(ErrorCode::kGridMismatch, fmt::format("measure has {} cells, operator {}", mu.size(), n));
  }
  const double h = 1.0 / static_cast<double>(n);
  std::vector<FiberCell> out(n);
  std::vector<double> used(n, eta);
  parallel_for(n, [&](std::size_t j) {
    FiberCell& dst = out[j];
    AtomList plus;
    AtomList minus;
    double wp = 0.0;
    double wm = 0.0;
    for (std::size_t k = plan_.offsets[j]; k < plan_.offsets[j + 1]; ++k) {
      const PreimagePiece& pc = plan_.pieces[k];
      const FiberCell& src = mu.cell(pc.source);
      const double frac = (pc.x_hi - pc.x_lo) / h;
      const double x = 0.5 * (pc.x_lo + pc.x_hi);
      auto push = [&](double weight, const AtomList& fiber, AtomList& into, double& total) {
        if (!(weight > 0.0)) return;
        const double w = weight * frac;
        total += w;
        for (const PointMass& a : fiber) {
          const double y = F_.G(x, a.pos);
          if (!(y >= -1e-12 && y <= 1.0 + 1e-12)) {
            throw Error(ErrorCode::kRangeViolation, fmt::format("G({}, {}) = {} leaves [0,1]", x, a.pos, y));
          }
          into.push_back({std::clamp(y, 0.0, 1.0), a.weight * w});
        }
      };
      push(src.phi_plus, src.pi_plus, plus, wp);
      push(src.phi_minus, src.pi_minus, minus, wm);
    }
    auto finish = [&](double total, AtomList& atoms, double& weight, AtomList& fiber) {
      if (!(total > 0.0)) {
        weight = 0.0;
        fiber = canonical_fiber();
        return;
      }
      weight = total;
      for (PointMass& a : atoms) a.weight /= total;
      fiber = compact_to_budget(std::move(atoms), eta, F_.atom_budget, used[j]);
    };
    finish(wp, plus, dst.phi_plus, dst.pi_plus);
    finish(wm, minus, dst.phi_minus, dst.pi_minus);
  });
  if (eta_used) *eta_used = *std::max_element(used.begin(), used.end());
  return DisintegratedMeasure(std::move(out), mu.p(), mu.A1());
}

DisintegratedMeasure transfer_once(const FiberSystem& F, const DisintegratedMeasure& mu) {
  return TransferOperator(F, mu.size()).apply(mu);
}

StepDiagnostics diagnose(const DisintegratedMeasure& mu, int step, std::size_t singular, double eta_used) {
  StepDiagnostics d;
  d.step = step;
  d.norm_l1 = norm_weak_L1(mu);
  d.norm_linf = norm_Linf(mu);
  d.var = path_variation(mu);
  d.s1 = strong_norm(mu.marginal()) + d.norm_l1;
  d.atoms_total = mu.atom_count();
  d.singular_preimages = singular;
  d.eta_used = eta_used;
  return d;
}

TransferRun transfer_n(const TransferOperator& op, const DisintegratedMeasure& mu, int n, double eta,
                       bool with_diagnostics) {
  if (n < 0) throw Error(ErrorCode::kBadInput, "step count must be >= 0");
  TransferRun run{mu, {}};
  if (with_diagnostics) run.diagnostics.push_back(diagnose(mu, 0, 0, 0.0));
  for (int s = 1; s <= n; ++s) {
    double used = eta;
    run.measure = op.apply(run.measure, eta, &used);
    if (with_diagnostics) run.diagnostics.push_back(diagnose(run.measure, s, op.singular_count(), used));
  }
  return run;
}

TransferRun transfer_n(const FiberSystem& F, const DisintegratedMeasure& mu, int n, double eta,
                       bool with_diagnostics) {
  return transfer_n(TransferOperator(F, mu.size()), mu, n, eta, with_diagnostics);
}

void write_diagnostics_csv(const std::vector<StepDiagnostics>& diag, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << "step,norm_l1,norm_linf,var,s1,atoms_total,singular_preimages\n";
  for (const StepDiagnostics& d : diag) {
    os << fmt::format("{},{},{},{},{},{},{}\n", d.step, d.norm_l1, d.norm_linf, d.var, d.s1, d.atoms_total,
                      d.singular_preimages);
  }
}

}  // namespace fibergap
