#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "fibergap/error.hpp"
#include "fibergap/rng.hpp"
#include "fibergap/stability.hpp"

using namespace fibergap;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kIoError;
}

std::vector<StabilityRow> synthetic(double c1, double c2, const std::vector<double>& ds) {
  std::vector<StabilityRow> rows;
  for (double d : ds) {
    StabilityRow r;
    r.delta = d;
    r.l1_diff = c1 * d * std::abs(std::log(d)) + c2 * d;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("skorokhod bound of the conjugating family") {
  const PerturbationFamily fam(default_spec("lorenz_cusp"), default_perturbation("lorenz_cusp"));
  const double d = 0.01;
  // sup|sigma - id| = d/4, sup|1/sigma' - 1| = d/(1-d) at x = 1.
  CHECK(skorokhod_bound(fam, d) == doctest::Approx(d / (1 - d)).epsilon(1e-9));
  CHECK(skorokhod_bound(fam, 0.0) == 0.0);
  const Conjugator s = fam.sigma(0.2);
  for (double y : {0.0, 0.1, 0.5, 0.77, 1.0}) CHECK(s.sigma(s.sigma_inverse(y)) == doctest::Approx(y).epsilon(1e-14));

  PerturbationSpec steep = default_perturbation("lorenz_cusp");
  steep.s_amp = 3.0;
  const PerturbationFamily bad(default_spec("lorenz_cusp"), steep);
  CHECK(code_of([&] { skorokhod_bound(bad, 0.5); }) == ErrorCode::kNotDiffeomorphism);
  CHECK(code_of([&] { bad.member(0.5); }) == ErrorCode::kNotDiffeomorphism);
  CHECK(code_of([&] { fam.member(-0.1); }) == ErrorCode::kBadInput);
}

TEST_CASE("UF checklist") {
  const PerturbationFamily fam(default_spec("doubling_affine"), default_perturbation("doubling_affine"));
  const ChecklistReport rep = uf_checklist(fam, {0.1, 0.05, 0.02}, 32, 1e-6, 300);
  CHECK(rep.failures.empty());
  REQUIRE(rep.rows.size() == 3);
  for (const ChecklistRow& r : rep.rows) {
    CHECK(r.skorokhod <= r.skorokhod_cap);
    CHECK(r.g_shift <= r.delta * (1 + 1e-12));
    CHECK(r.lambda1 > 1.0);
    CHECK(r.est1 < 1.0);
    CHECK(r.weak_ratio <= 1.0 + 1e-9);
    CHECK(std::isfinite(r.M));
  }

  PerturbationSpec loud = default_perturbation("doubling_affine");
  loud.w_amp = 2.0;
  const PerturbationFamily over(default_spec("doubling_affine"), loud);
  CHECK(code_of([&] { uf_checklist(over, {0.05, 0.02}, 32, 1e-6, 300); }) == ErrorCode::kChecklistFailure);
  const ChecklistReport collected = uf_checklist(over, {0.05, 0.02}, 32, 1e-6, 300, true);
  CHECK(collected.failures.size() == 2);
  CHECK(collected.failures[0].find("UBV3") != std::string::npos);
}

TEST_CASE("discrepancy") {
  const std::size_t n = 64;
  Rng rng(99);
  const PerturbationFamily fam(default_spec("trivial_product"), default_perturbation("trivial_product"));
  const TransferOperator op0(fam.member(0.0), n);
  for (int t = 0; t < 5; ++t) {
    const auto f = random_probability_measure(n, rng);
    CHECK(discrepancy(op0, op0, f) <= 1e-12);
    for (double d : {0.1, 0.02}) {
      const TransferOperator op(fam.member(d), n);
      const double eps = 2 * fam.member(d).eta + 1e-12;
      CHECK(discrepancy(op0, op, f) <= d + eps);
    }
  }
  const TransferOperator other(fam.member(0.0), 32);
  CHECK(code_of([&] { discrepancy(op0, other, lebesgue_times_dirac(n, 0.0)); }) == ErrorCode::kGridMismatch);
}

TEST_CASE("modulus fit") {
  const std::vector<double> ds{0.04, 0.02, 0.01, 0.005, 0.0025};
  const ModulusFit a = fit_modulus(synthetic(2, 1, ds));
  CHECK(a.c1 == doctest::Approx(2).epsilon(1e-9));
  CHECK(a.c2 == doctest::Approx(1).epsilon(1e-9));
  CHECK(a.quality <= 1e-9);
  const ModulusFit b = fit_modulus(synthetic(0, 3, ds));
  CHECK(b.c1 == doctest::Approx(0).scale(1).epsilon(1e-9));
  CHECK(b.c2 == doctest::Approx(3).epsilon(1e-9));
  CHECK(b.predict(0.01) == doctest::Approx(0.03).epsilon(1e-9));
  CHECK(b.predict(0.0) == 0.0);
  // Negative unconstrained slope gets clamped.
  const ModulusFit c = fit_modulus(synthetic(-1, 5, ds));
  CHECK(c.c1 >= 0.0);
  CHECK(c.c2 >= 0.0);
  CHECK(code_of([&] { fit_modulus(synthetic(1, 1, {0.1, 0.05})); }) == ErrorCode::kInsufficientData);
}

TEST_CASE("stability curve for the fiber shift family") {
  const PerturbationFamily fam(default_spec("trivial_product"), default_perturbation("trivial_product"));
  const std::vector<double> ds{0.2, 0.1, 0.05, 0.025};
  StabilityOptions o;
  o.n = 32;
  o.tol = 1e-9;
  o.n_max = 300;
  const StabilityCurve c = stability_curve(fam, ds, o);
  CHECK(c.f0_converged);
  REQUIRE(c.rows.size() == ds.size());
  for (const StabilityRow& r : c.rows) {
    CHECK(r.converged);
    // The invariant fiber is a point mass at 2 delta.
    CHECK(std::abs(r.l1_diff - 2 * r.delta) <= 2 * o.tol + 1e-9);
    CHECK(r.var_fdelta <= 1e-9);
  }
  const ModulusFit fit = fit_modulus(c.rows);
  CHECK(fit.c2 == doctest::Approx(2).epsilon(1e-6));

  CHECK(code_of([&] { stability_curve(fam, {0.1, 0.2, 0.05}, o); }) == ErrorCode::kBadInput);
  CHECK(code_of([&] { stability_curve(fam, {0.1, -0.2}, o); }) == ErrorCode::kBadInput);
  CHECK(code_of([&] { stability_curve(fam, {}, o); }) == ErrorCode::kBadInput);
}

TEST_CASE("perturbation decomposition of the invariant difference") {
  // f_d - f_0 = F0^N (f_d - f_0) + sum_{k<N} F0^k (F_d - F_0) f_d, up to the residuals.
  const std::size_t n = 32;
  const PerturbationFamily fam(default_spec("trivial_product"), default_perturbation("trivial_product"));
  const double d = 0.05;
  const TransferOperator op0(fam.member(0.0), n);
  const TransferOperator opd(fam.member(d), n);
  const InvariantResult r0 = invariant_measure(op0, 1e-11, 400);
  const InvariantResult rd = invariant_measure(opd, 1e-11, 400);
  REQUIRE(r0.converged);
  REQUIRE(rd.converged);
  const auto h = linear_combination(opd.apply(rd.measure), 1.0, op0.apply(rd.measure), -1.0);
  auto sum = h;
  auto term = h;
  const int N = 40;
  for (int k = 1; k < N; ++k) {
    term = op0.apply(term);
    sum = linear_combination(sum, 1.0, term, 1.0);
  }
  auto tail = linear_combination(rd.measure, 1.0, r0.measure, -1.0);
  for (int k = 0; k < N; ++k) tail = op0.apply(tail);
  const auto lhs = linear_combination(rd.measure, 1.0, r0.measure, -1.0);
  const auto rhs = linear_combination(sum, 1.0, tail, 1.0);
  CHECK(distance_L1(lhs, rhs) <= N * 4e-11 + 1e-9);
  CHECK(norm_weak_L1(tail) <= 1e-9);
}

TEST_CASE("uniform Var bound on the cusp family") {
  const PerturbationFamily fam(default_spec("lorenz_cusp"), default_perturbation("lorenz_cusp"));
  const std::vector<double> ds{0.04, 0.02, 0.01};
  StabilityOptions o;
  o.n = 64;
  o.tol = 1e-3;
  o.n_max = 300;
  const StabilityCurve c = stability_curve(fam, ds, o);
  const UniformVarBound u = uniform_var_bound(fam, c, ds, o.n, 2.0, 0.25);
  CHECK(u.C0_per_delta.size() == ds.size() + 1);
  for (double v : u.C0_per_delta) CHECK(v >= 1.0);
  CHECK(std::isfinite(u.C0_bar));
  CHECK(u.max_var <= u.C0_bar);
  const LyPerDelta m = member_constants(fam, 0.02, o.n, 2.0, 0.25);
  CHECK(m.beta < 1.0);
  CHECK(m.C0 == doctest::Approx(std::max(1.0, m.K3 * std::max(m.K2, 1.0) / (1 - m.beta))));
}
