#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fibergap/error.hpp"
#include "fibergap/rng.hpp"
#include "fibergap/spectral.hpp"
#include "fibergap/systems.hpp"

using namespace fibergap;

namespace {

GapInputs worked_example() {
  GapInputs in;
  in.alpha = 1.0 / 3.0;
  in.r = 0.5;
  in.D = 1.0;
  in.beta0 = 0.75;
  in.C = 0.0;
  in.k = 2;
  in.M1 = 1.0;
  in.mu0_s1_norm = 2.0;
  return in;
}

std::vector<DisintegratedMeasure> seeds(std::size_t n, std::uint64_t s, int count) {
  Rng rng(s);
  std::vector<DisintegratedMeasure> out;
  for (int i = 0; i < count; ++i) out.push_back(random_zero_mass_measure(n, rng));
  return out;
}

}  // namespace

TEST_CASE("invariant measure of system B") {
  const std::size_t n = 64;
  const TransferOperator op(make_system(default_spec("trivial_product")), n);
  const InvariantResult r = invariant_measure(op, 1e-4, 200);
  CHECK(r.converged);
  CHECK(distance_L1(r.measure, lebesgue_times_dirac(n, 0.0)) <= 2e-4);
  CHECK(r.measure.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  // Increments shrink along the iteration, with some jitter allowed.
  for (std::size_t k = 1; k < r.increments.size(); ++k) CHECK(r.increments[k] <= 1.05 * r.increments[k - 1]);
}

TEST_CASE("invariant measure of system A has uniform marginal") {
  const std::size_t n = 64;
  const TransferOperator op(make_system(default_spec("doubling_affine")), n);
  const InvariantResult r = invariant_measure(op, 1e-4, 200);
  CHECK(r.converged);
  CHECK(r.residual <= 1e-4 * 1.0001);
  for (double v : r.measure.marginal().values) CHECK(std::abs(v - 1.0) <= 1e-3);
}

TEST_CASE("invariant measure of the cusp system and the Var bound") {
  const std::size_t n = 64;
  const FiberSystem F = make_system(default_spec("lorenz_cusp"));
  const TransferOperator op(F, n);
  const InvariantResult r = invariant_measure(op, 1e-3, 200);
  CHECK(r.converged);
  CHECK(r.residual <= 1e-3);

  const int k = select_iterate(F.base);
  const LyBaseConstants ly = ly_base_constants(F.base, k);
  GapInputs in = worked_example();
  in.alpha = F.alpha;
  in.beta0 = ly.beta0;
  in.C = ly.C;
  in.k = ly.k;
  in.M1 = ly.M1;
  in.r = 0.5;
  const ConstantLedger led = gap_constants(in);
  const auto xs = linspace(0, 1, 257);
  const double K3 = k3_constant(branch_data(F.base), var_diamond(F.G, xs, xs).surrogate);
  const double C0 = c0_constant(K3, led.get("K2"), ly.beta0);
  CHECK(path_variation(r.measure) <= 2 * C0);
}

TEST_CASE("non-convergence is flagged") {
  const TransferOperator op(make_system(default_spec("doubling_affine")), 32);
  const InvariantResult r = invariant_measure(op, 1e-14, 3);
  CHECK_FALSE(r.converged);
  CHECK(r.steps == 3);
}

TEST_CASE("equilibrium rate") {
  const std::size_t n = 32;
  const TransferOperator B(make_system(default_spec("trivial_product")), n);
  const auto seed = linear_combination(lebesgue_times_dirac(n, 0.0), 1.0, lebesgue_times_dirac(n, 1.0), -1.0);
  const EquilibriumRate eb = equilibrium_rate(B, {seed}, 12);
  CHECK(eb.beta1_hat == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(eb.beta1_hat <= std::sqrt(0.5));

  const TransferOperator A(make_system(default_spec("doubling_affine")), n);
  const EquilibriumRate ea = equilibrium_rate(A, seeds(n, 5, 5), 12);
  CHECK(ea.beta1_hat <= std::max(std::sqrt(1.0 / 3.0), std::sqrt(0.5)) + 0.05);

  auto massive = lebesgue_times_dirac(n, 0.2);
  massive.cell(0).phi_plus += 3.2;  // mass 0.1 extra
  const auto bad = linear_combination(massive, 1.0, lebesgue_times_dirac(n, 0.0), -1.0);
  try {
    equilibrium_rate(A, {bad}, 12);
    FAIL("expected PreconditionFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPrecondition);
  }
}

TEST_CASE("gap constants: worked instantiation") {
  const ConstantLedger L = gap_constants(worked_example());
  CHECK(L.get("beta1") == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(std::abs(L.get("beta1") - 0.70711) < 1e-5);
  CHECK(std::abs(L.get("lambda") - 0.86603) < 1e-5);
  CHECK(std::abs(L.get("lambda0") - 0.86603) < 1e-5);
  CHECK(std::abs(L.get("xi") - 0.93061) < 1e-5);
  CHECK(std::abs(L.get("alpha_bar") - 2.0) < 1e-9);
  CHECK(L.get("xi") < 1.0);
  // Hand recomputation of the longer chain.
  const double B3 = 1.0 / 0.75, B2 = 1.0 + 1.0 / 0.25, D2 = (1.0 + 2.0) / std::sqrt(0.5);
  const double K1 = std::pow(std::sqrt(0.75), -0.5) * (B3 * (B3 + B2) + B2 * D2);
  CHECK(L.get("B2") == doctest::Approx(B2).epsilon(1e-12));
  CHECK(L.get("D2") == doctest::Approx(D2).epsilon(1e-12));
  CHECK(L.get("K1") == doctest::Approx(K1).epsilon(1e-12));
  CHECK(L.get("K") == doctest::Approx(3 * K1).epsilon(1e-12));
  CHECK(L.get("H_N") == 1.0);
  CHECK(L.get("alpha1") == doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));
}

TEST_CASE("gap constants: provenance, recompute and round trip") {
  const ConstantLedger L = gap_constants(worked_example());
  const ConstantLedger R = recompute(L);
  REQUIRE(R.entries().size() == L.entries().size());
  for (std::size_t i = 0; i < L.entries().size(); ++i) {
    CHECK(R.entries()[i].key == L.entries()[i].key);
    CHECK(R.entries()[i].value == L.entries()[i].value);
  }
  const ConstantLedger P = ConstantLedger::parse(L.serialize());
  CHECK(P.serialize() == L.serialize());
  for (const LedgerEntry& e : P.entries()) CHECK(e.value == L.get(e.key));
  CHECK(L.entries()[0].provenance == Provenance::kConfigured);
  CHECK(provenance_name(Provenance::kFormula) == "formula");
  CHECK_THROWS_AS(L.get("nope"), Error);
}

TEST_CASE("gap constants: rate checks and the degenerate chain") {
  GapInputs in = worked_example();
  in.r = 1.0;
  CHECK_THROWS_AS(gap_constants(in), Error);
  in = worked_example();
  in.beta0 = 1.2;
  CHECK_THROWS_AS(gap_constants(in), Error);
  in = worked_example();
  in.alpha = 0.0;
  in.r = 0.0;
  in.beta0 = 0.0;
  const ConstantLedger z = gap_constants(in);
  CHECK(z.get("lambda0") == 0.0);
  CHECK(z.get("xi") == 0.0);
}

TEST_CASE("K3 and C0 for system A") {
  const FiberSystem F = make_system(default_spec("doubling_affine"));
  const auto bd = branch_data(F.base);
  REQUIRE(bd.size() == 2);
  CHECK(bd[0].sup_g == doctest::Approx(0.5));
  CHECK(bd[0].var_g == doctest::Approx(0.0));
  const auto xs = linspace(0, 1, 257);
  const double vd = var_diamond(F.G, xs, xs).surrogate;
  CHECK(vd == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  const double K3 = k3_constant(bd, vd);
  CHECK(K3 == doctest::Approx(0.5 * (2.0 / 3.0) + 2.0).epsilon(1e-9));
  const ConstantLedger L = gap_constants(worked_example());
  CHECK(c0_constant(K3, L.get("K2"), 0.75) == doctest::Approx(K3 * L.get("K2") / 0.25).epsilon(1e-12));
  CHECK(c0_constant(0.01, 0.5, 0.5) == 1.0);
}

TEST_CASE("gap decay on systems A and B") {
  const std::size_t n = 64;
  for (const char* fam : {"doubling_affine", "trivial_product"}) {
    const FiberSystem F = make_system(default_spec(fam));
    const TransferOperator op(F, n);
    const InvariantResult inv = invariant_measure(op, 1e-6, 300);
    GapInputs in = worked_example();
    in.alpha = F.alpha;
    in.mu0_s1_norm = norm_S1(inv.measure);
    const ConstantLedger L = gap_constants(in);
    const GapDecayReport rep = verify_gap_decay(op, L.get("xi"), L.get("K"), seeds(n, 77, 5), 12);
    CHECK(rep.max_ratio <= 1.05);
    CHECK(rep.violations.empty());
    CHECK(rep.ratios[0][0] == doctest::Approx(1.0 / L.get("K")).epsilon(1e-12));
  }
}

TEST_CASE("equilibrium bound with D2 and the L-infinity Lasota-Yorke bound") {
  const std::size_t n = 64;
  Rng rng(606);
  for (const char* fam : {"doubling_affine", "trivial_product"}) {
    const FiberSystem F = make_system(default_spec(fam));
    const TransferOperator op(F, n);
    const InvariantResult inv = invariant_measure(op, 1e-9, 400);
    GapInputs in = worked_example();
    in.alpha = F.alpha;
    const ConstantLedger L = gap_constants(in);
    for (int t = 0; t < 3; ++t) {
      const auto mu = random_probability_measure(n, rng);
      auto cur = mu;
      const double s1 = distance_S1(mu, inv.measure);
      const double sinf = norm_Sinf(mu);
      const double w = norm_weak_L1(mu);
      for (int k = 1; k <= 10; ++k) {
        double eta_used = 0.0;
        cur = op.apply(cur, F.eta, &eta_used);
        const double eps = 2.0 * k * F.eta * 2.0 + 1e-9;
        CHECK(distance_L1(cur, inv.measure) <=
              L.get("D2") * std::pow(L.get("beta1"), k) * s1 + k * eps + inv.residual * k);
        CHECK(norm_Sinf(cur) <= L.get("A1_prime") * std::pow(L.get("alpha1"), k) * sinf + L.get("B4") * w + eps);
      }
    }
  }
}
