#include "fibergap/stability.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "fibergap/error.hpp"
#include "fibergap/rng.hpp"

namespace fibergap {

PerturbationSpec default_perturbation(const std::string& family) {
  PerturbationSpec p;
  if (family == "trivial_product") {
    p.w_amp = 1.0;
    p.v0 = 1.0;
  } else if (family == "lorenz_cusp") {
    p.s_amp = 1.0;
    p.w_amp = 1.0;
    p.v0 = 1.0;
    p.v1 = -1.0;
  } else if (family == "doubling_affine") {
    p.s_amp = 1.0;
    p.w_amp = 1.0;
    p.v0 = 1.0;
    p.v1 = -1.0;
  } else {
    throw Error(ErrorCode::kConfigError, fmt::format("no perturbation preset for '{}'", family));
  }
  return p;
}

PerturbationFamily::PerturbationFamily(SystemSpec base, PerturbationSpec pert)
    : base_(std::move(base)), pert_(pert) {
  if (!(pert_.delta_max > 0.0)) throw Error(ErrorCode::kBadInput, "delta_max must be positive");
}

Conjugator PerturbationFamily::sigma(double delta) const {
  const double a = delta * pert_.s_amp;
  return {[a](double x) { return x + a * x * (1.0 - x); },
          [a](double x) { return 1.0 + a * (1.0 - 2.0 * x); },
          [a](double y) {
            // root in [0,1] of a x^2 - (1+a) x + y = 0, cancellation-free form
            const double b = 1.0 + a;
            return std::clamp(2.0 * y / (b + std::sqrt(std::max(0.0, b * b - 4.0 * a * y))), 0.0, 1.0);
          }};
}

namespace {

void check_diffeomorphism(const Conjugator& s, double delta) {
  for (int i = 0; i <= 4096; ++i) {
    const double x = i / 4096.0;
    if (!(s.sigma_prime(x) > 0.0)) {
      throw Error(ErrorCode::kNotDiffeomorphism, fmt::format("sigma' <= 0 at x={} for delta={}", x, delta));
    }
  }
}

}  // namespace

FiberSystem PerturbationFamily::member(double delta) const {
  if (!(delta >= 0.0)) throw Error(ErrorCode::kBadInput, fmt::format("delta={} must be >= 0", delta));
  FiberSystem F0 = make_system(base_);
  if (delta == 0.0) return F0;
  const Conjugator s = sigma(delta);
  check_diffeomorphism(s, delta);
  PiecewiseExpandingMap T = pert_.s_amp == 0.0
                                ? F0.base
                                : conjugated_map(F0.base, s, fmt::format("{} o sigma({})", F0.base.name(), delta));
  const auto G0 = F0.G;
  const double c = delta * pert_.w_amp;
  const double v0 = pert_.v0;
  const double v1 = pert_.v1;
  FiberSystem F{fmt::format("{}[delta={}]", F0.name, delta),
                std::move(T),
                [G0, c, v0, v1](double x, double y) { return G0(x, y) + c * (v0 + v1 * y); },
                F0.alpha,
                F0.H,
                F0.atom_budget,
                F0.eta};
  check_fiber_system(F);
  return F;
}

double skorokhod_bound(const PerturbationFamily& family, double delta) {
  if (!(delta >= 0.0)) throw Error(ErrorCode::kBadInput, "delta must be >= 0");
  if (delta == 0.0) return 0.0;
  const Conjugator s = family.sigma(delta);
  check_diffeomorphism(s, delta);
  double eps = 0.0;
  constexpr int kGrid = 1 << 16;
  for (int i = 0; i <= kGrid; ++i) {
    const double x = static_cast<double>(i) / kGrid;
    eps = std::max(eps, std::abs(s.sigma(x) - x));
    eps = std::max(eps, std::abs(1.0 / s.sigma_prime(x) - 1.0));
  }
  return eps;
}

double discrepancy(const TransferOperator& op0, const TransferOperator& op_delta, const DisintegratedMeasure& f) {
  if (op0.n() != op_delta.n() || f.size() != op0.n()) {
    throw Error(ErrorCode::kGridMismatch, "operators and measure must share a grid");
  }
  return distance_L1(op0.apply(f), op_delta.apply(f));
}

StabilityCurve stability_curve(const PerturbationFamily& family, const std::vector<double>& deltas,
                               const StabilityOptions& opts) {
  if (deltas.empty()) throw Error(ErrorCode::kBadInput, "empty delta list");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw Error(ErrorCode::kBadInput, "deltas must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw Error(ErrorCode::kBadInput, "deltas must be sorted descending");
  }
  StabilityCurve curve;
  const TransferOperator op0(family.member(0.0), opts.n);
  InvariantResult r0 = invariant_measure(op0, opts.tol, opts.n_max);
  curve.f0 = std::move(r0.measure);
  curve.f0_residual = r0.residual;
  curve.f0_converged = r0.converged;
  for (double d : deltas) {
    const TransferOperator op(family.member(d), opts.n);
    InvariantResult r = invariant_measure(op, opts.tol, opts.n_max);
    StabilityRow row;
    row.delta = d;
    row.l1_diff = distance_L1(r.measure, curve.f0);
    row.var_fdelta = path_variation(r.measure);
    row.discrepancy = discrepancy(op0, op, r.measure);
    row.residual = r.residual;
    row.steps = r.steps;
    row.converged = r.converged;
    curve.rows.push_back(row);
    curve.f_delta.push_back(std::move(r.measure));
  }
  return curve;
}

void write_stability_csv(const std::vector<StabilityRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << "delta,l1_diff,var_fdelta,discrepancy,residual\n";
  for (const StabilityRow& r : rows) {
    os << fmt::format("{},{},{},{},{}\n", r.delta, r.l1_diff, r.var_fdelta, r.discrepancy, r.residual);
  }
}

double ModulusFit::predict(double delta) const {
  if (delta <= 0.0) return 0.0;
  return c1 * delta * std::abs(std::log(delta)) + c2 * delta;
}

ModulusFit fit_modulus(const std::vector<StabilityRow>& rows) {
  std::vector<double> a, b, y;
  std::set<double> distinct;
  for (const StabilityRow& r : rows) {
    if (!(r.delta > 0.0)) continue;
    distinct.insert(r.delta);
    a.push_back(r.delta * std::abs(std::log(r.delta)));
    b.push_back(r.delta);
    y.push_back(r.l1_diff);
  }
  if (distinct.size() < 3) throw Error(ErrorCode::kInsufficientData, "need at least 3 distinct positive deltas");
  double aa = 0, ab = 0, bb = 0, ay = 0, by = 0, yy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    aa += a[i] * a[i];
    ab += a[i] * b[i];
    bb += b[i] * b[i];
    ay += a[i] * y[i];
    by += b[i] * y[i];
    yy += y[i] * y[i];
  }
  auto rss = [&](double c1, double c2) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double e = y[i] - c1 * a[i] - c2 * b[i];
      s += e * e;
    }
    return s;
  };
  std::vector<std::pair<double, double>> cand;
  const double det = aa * bb - ab * ab;
  if (std::abs(det) > 1e-300) {
    const double c1 = (ay * bb - by * ab) / det;
    const double c2 = (aa * by - ab * ay) / det;
    if (c1 >= 0.0 && c2 >= 0.0) cand.emplace_back(c1, c2);
  }
  cand.emplace_back(0.0, std::max(0.0, by / bb));
  cand.emplace_back(std::max(0.0, ay / aa), 0.0);
  cand.emplace_back(0.0, 0.0);
  ModulusFit best;
  double best_rss = std::numeric_limits<double>::infinity();
  for (const auto& [c1, c2] : cand) {
    const double r = rss(c1, c2);
    if (r < best_rss) {
      best_rss = r;
      best.c1 = c1;
      best.c2 = c2;
    }
  }
  best.quality = yy > 0.0 ? std::sqrt(best_rss / yy) : 0.0;
  return best;
}

LyPerDelta member_constants(const PerturbationFamily& family, double delta, std::size_t n, double p, double A1) {
  const FiberSystem F = family.member(delta);
  const int k = select_iterate(F.base);
  const LyBaseConstants ly = ly_base_constants(F.base, k, {n, p, A1, Reconstruction::kLinear});
  const double K2 = ly.M1 / ly.beta0 + ly.C / (1.0 - ly.beta0);
  double vd = 0.0;
  const std::vector<double> ys = linspace(0.0, 1.0, 65);
  for (std::size_t i = 0; i < F.base.branch_count(); ++i) {
    const Branch& b = F.base.branch(i);
    vd += var_diamond(F.G, linspace(b.lo, b.hi, 257), ys).surrogate;
  }
  const double K3 = k3_constant(branch_data(F.base), vd);
  return {delta, k, ly.beta0, K2, K3, c0_constant(K3, K2, ly.beta0), vd};
}

UniformVarBound uniform_var_bound(const PerturbationFamily& family, const StabilityCurve& curve,
                                  const std::vector<double>& deltas, std::size_t n, double p, double A1) {
  UniformVarBound out;
  out.max_var = path_variation(curve.f0);
  for (const DisintegratedMeasure& f : curve.f_delta) out.max_var = std::max(out.max_var, path_variation(f));
  double sup_c0 = member_constants(family, 0.0, n, p, A1).C0;
  out.C0_per_delta.push_back(sup_c0);
  for (double d : deltas) {
    const double c0 = member_constants(family, d, n, p, A1).C0;
    out.C0_per_delta.push_back(c0);
    sup_c0 = std::max(sup_c0, c0);
  }
  out.C0_bar = 2.0 * sup_c0;
  return out;
}

ChecklistReport uf_checklist(const PerturbationFamily& family, const std::vector<double>& deltas, std::size_t n,
                             double tol, int n_max, bool collect_only) {
  if (deltas.empty()) throw Error(ErrorCode::kBadInput, "empty delta grid");
  ChecklistReport rep;
  const FiberSystem F0 = family.member(0.0);
  const int k0 = select_iterate(F0.base);
  const PerturbationSpec& ps = family.perturbation();
  const double slope = ps.s_amp / std::max(1e-12, 1.0 - ps.delta_max * std::abs(ps.s_amp));
  for (double d : deltas) {
    ChecklistRow row{};
    row.delta = d;
    FiberSystem F = [&] {
      try {
        return family.member(d);
      } catch (const Error& e) {
        // a member that fails the fiber map checks is reported, F0 stands in
        if (e.code() != ErrorCode::kBadInput) throw;
        rep.failures.push_back(fmt::format("admissibility at delta={}: {}", d, e.what()));
        FiberSystem G = family.member(0.0);
        return G;
      }
    }();
    const TransferOperator op(F, n);
    const InvariantResult inv = invariant_measure(op, tol, n_max);
    row.M = norm_S1(inv.measure);
    row.skorokhod = skorokhod_bound(family, d);
    row.skorokhod_cap = slope * d;
    if (row.skorokhod > row.skorokhod_cap * (1.0 + 1e-9) + 1e-15) {
      rep.failures.push_back(fmt::format("UBV2 at delta={}: d_S bound {} > {}", d, row.skorokhod, row.skorokhod_cap));
    }
    const double c = d * ps.w_amp;
    // the shift does not depend on x
    for (int l = 0; l <= 1024; ++l) {
      row.g_shift = std::max(row.g_shift, std::abs(c * (ps.v0 + ps.v1 * (l / 1024.0))));
    }
    if (row.g_shift > d * (1.0 + 1e-12)) {
      rep.failures.push_back(fmt::format("UBV3 at delta={}: sup|G0-Gd| = {} > delta", d, row.g_shift));
    }
    const ExpansionReport ex = check_expansion(F.base);
    row.lambda1 = ex.lambda1;
    if (!ex.expanding) rep.failures.push_back(fmt::format("UBV4 at delta={}: not expanding", d));
    row.est1 = est1_quantity(F.base, k0).est1;
    if (!(row.est1 < 1.0)) rep.failures.push_back(fmt::format("UBV1 at delta={}: est1 = {} at k = {}", d, row.est1, k0));
    Rng rng(0x5eed + static_cast<std::uint64_t>(d * 1e6));
    for (int t = 0; t < 3; ++t) {
      const DisintegratedMeasure mu = random_signed_measure(n, rng);
      const double before = norm_weak_L1(mu);
      const double after = norm_weak_L1(op.apply(mu));
      const double slack = F.eta * mu.total_variation_mass() + 1e-12;
      row.weak_ratio = std::max(row.weak_ratio, before > 0.0 ? (after - slack) / before : 0.0);
    }
    if (row.weak_ratio > 1.0 + 1e-9) {
      rep.failures.push_back(fmt::format("UF4 at delta={}: weak ratio {}", d, row.weak_ratio));
    }
    rep.rows.push_back(row);
  }
  if (!rep.failures.empty() && !collect_only) {
    std::string msg;
    for (const std::string& f : rep.failures) msg += (msg.empty() ? "" : "; ") + f;
    throw Error(ErrorCode::kChecklistFailure, msg);
  }
  return rep;
}

}  // namespace fibergap
