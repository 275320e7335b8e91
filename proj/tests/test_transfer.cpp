#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fibergap/error.hpp"
#include "fibergap/rng.hpp"
#include "fibergap/systems.hpp"
#include "fibergap/transfer.hpp"

using namespace fibergap;

TEST_CASE("system B halves the fiber atoms") {
  const std::size_t n = 64;
  const TransferOperator op(make_system(default_spec("trivial_product")), n);
  const auto mu = op.apply(lebesgue_square(n, 32), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const FiberCell& c = mu.cell(j);
    CHECK(c.phi_plus == doctest::Approx(1.0).epsilon(1e-14));
    REQUIRE(c.pi_plus.size() == 32);
    for (std::size_t k = 0; k < 32; ++k) {
      CHECK(c.pi_plus[k].pos == doctest::Approx((k + 0.5) / 64.0).epsilon(1e-14));
      CHECK(c.pi_plus[k].weight == doctest::Approx(1.0 / 32).epsilon(1e-14));
    }
  }
}

TEST_CASE("system A on Lebesgue x delta_0") {
  const std::size_t n = 32;
  const TransferOperator op(make_system(default_spec("doubling_affine")), n);
  const auto mu = op.apply(lebesgue_times_dirac(n, 0.0), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double g = (j + 0.5) / n;
    const FiberCell& c = mu.cell(j);
    CHECK(c.phi_plus == doctest::Approx(1.0).epsilon(1e-14));
    REQUIRE(c.pi_plus.size() == 2);
    CHECK(c.pi_plus[0].pos == doctest::Approx((2.0 / 3.0) * (g / 2)).epsilon(1e-13));
    CHECK(c.pi_plus[1].pos == doctest::Approx((2.0 / 3.0) * (g / 2 + 0.5)).epsilon(1e-13));
    CHECK(c.pi_plus[0].weight == doctest::Approx(0.5));
    CHECK(c.pi_plus[1].weight == doctest::Approx(0.5));
  }
  const TransferRun run = transfer_n(op, lebesgue_times_dirac(n, 0.0), 10, 1e-5);
  REQUIRE(run.diagnostics.size() == 11);
  for (const StepDiagnostics& d : run.diagnostics) CHECK(d.norm_l1 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mass preservation and marginal consistency") {
  Rng rng(12);
  for (const char* fam : {"doubling_affine", "trivial_product", "lorenz_cusp"}) {
    const TransferOperator op(make_system(default_spec(fam)), 64);
    for (int t = 0; t < 10; ++t) {
      const auto mu = random_probability_measure(64, rng);
      const auto out = op.apply(mu);
      CHECK(out.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
      const GridDensity expect = pf_density(op.plan(), mu.marginal(), Reconstruction::kConstant);
      const GridDensity got = out.marginal();
      for (std::size_t j = 0; j < 64; ++j) CHECK(std::abs(got.values[j] - expect.values[j]) <= 1e-6);
      out.validate();
    }
  }
}

TEST_CASE("n = 0 returns the input") {
  Rng rng(1);
  const FiberSystem F = make_system(default_spec("lorenz_cusp"));
  const auto mu = random_signed_measure(16, rng);
  const TransferRun r = transfer_n(F, mu, 0, 1e-5);
  CHECK(distance_L1(r.measure, mu) == 0.0);
  CHECK(r.diagnostics.size() == 1);
}

TEST_CASE("system B collapses Lebesgue squared onto delta_0") {
  const std::size_t n = 64;
  const double eta = 1e-5;
  const FiberSystem F = make_system(default_spec("trivial_product"));
  const TransferRun r = transfer_n(F, lebesgue_square(n, 32), 8, eta);
  for (const FiberCell& c : r.measure.cells()) {
    for (const PointMass& a : c.pi_plus) {
      CHECK(a.pos >= 0.0);
      CHECK(a.pos <= std::ldexp(1.0, -8) + 1e-15);
    }
  }
  CHECK(distance_L1(r.measure, lebesgue_times_dirac(n, 0.0)) <= std::ldexp(1.0, -9) + 8 * eta);
}

TEST_CASE("weak contraction and the marginal bound on random signed measures") {
  Rng rng(314);
  for (const char* fam : {"doubling_affine", "trivial_product", "lorenz_cusp"}) {
    const FiberSystem F = make_system(default_spec(fam));
    const TransferOperator op(F, 64);
    for (int t = 0; t < 20; ++t) {
      const auto mu = random_signed_measure(64, rng);
      double eta_used = 0.0;
      const auto out = op.apply(mu, F.eta, &eta_used);
      const double slack = 2.0 * eta_used * mu.total_variation_mass() + 1e-12;
      const double w = norm_weak_L1(mu);
      CHECK(norm_weak_L1(out) <= w + slack);
      CHECK(norm_weak_L1(out) <= F.alpha * w + (F.alpha + 1) * l1_norm(mu.marginal()) + slack);
    }
  }
}

TEST_CASE("grid mismatch and atom budget") {
  const FiberSystem F = make_system(default_spec("trivial_product"));
  const TransferOperator op(F, 32);
  CHECK_THROWS_AS(op.apply(lebesgue_square(16, 4)), Error);
  try {
    op.apply(lebesgue_square(16, 4));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGridMismatch);
  }
  FiberSystem tight = make_system(default_spec("doubling_affine"));
  tight.atom_budget = 4;
  const TransferOperator top(tight, 16);
  try {
    top.apply(lebesgue_square(16, 32), 0.0);
    FAIL("expected AtomBudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAtomBudgetExceeded);
  }
}

TEST_CASE("diagnostics CSV") {
  const FiberSystem F = make_system(default_spec("doubling_affine"));
  const TransferRun r = transfer_n(F, lebesgue_square(16, 8), 3, 1e-5);
  const auto path = (std::filesystem::temp_directory_path() / "fg_diag.csv").string();
  write_diagnostics_csv(r.diagnostics, path);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "step,norm_l1,norm_linf,var,s1,atoms_total,singular_preimages");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("cusp operator reports singular preimages") {
  const TransferOperator op(make_system(default_spec("lorenz_cusp")), 64);
  const TransferRun r = transfer_n(op, lebesgue_square(64, 8), 2, 1e-5);
  CHECK(r.diagnostics.back().singular_preimages == op.singular_count());
}
