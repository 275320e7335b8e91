#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fibergap/error.hpp"
#include "fibergap/fibered_measures.hpp"
#include "fibergap/rng.hpp"
#include "fibergap/systems.hpp"

using namespace fibergap;

namespace {

// phi * Gamma for a positive base function phi.
DisintegratedMeasure scale_cells(DisintegratedMeasure mu, const std::vector<double>& phi) {
  for (std::size_t j = 0; j < mu.size(); ++j) {
    mu.cell(j).phi_plus *= phi[j];
    mu.cell(j).phi_minus *= phi[j];
  }
  return mu;
}

double cell_w(const DisintegratedMeasure& mu, std::size_t j) { return bl_norm(mu.restriction(j)); }

}  // namespace

TEST_CASE("product constructors and norms") {
  const std::size_t n = 64;
  const auto leb_d0 = lebesgue_times_dirac(n, 0.0);
  CHECK(norm_weak_L1(leb_d0) == doctest::Approx(1.0));
  CHECK(norm_Linf(leb_d0) == doctest::Approx(1.0));
  CHECK(norm_S1(leb_d0) == doctest::Approx(2.0));
  CHECK(norm_Sinf(leb_d0) == doctest::Approx(2.0));
  CHECK(path_variation(leb_d0) == 0.0);
  CHECK(leb_d0.total_mass() == doctest::Approx(1.0));

  const auto leb2 = lebesgue_square(n, 32);
  CHECK(norm_weak_L1(leb2) == doctest::Approx(1.0));
  CHECK(leb2.cell(0).pi_plus.size() == 32);

  const auto diff = linear_combination(leb_d0, 1.0, lebesgue_times_dirac(n, 0.5), -1.0);
  CHECK(norm_weak_L1(diff) == doctest::Approx(0.5));
  CHECK(norm_Linf(diff) == doctest::Approx(0.5));
  CHECK(diff.total_mass() == doctest::Approx(0.0).epsilon(1e-15));

  std::vector<double> heavy(n, 1.0);
  heavy[7] = 2.0;
  const auto h = from_product(GridDensity(heavy), [](std::size_t) { return dirac(0.0); }, true);
  CHECK(norm_Linf(h) == doctest::Approx(2.0));

  const auto zero = linear_combination(leb_d0, 1.0, leb_d0, -1.0);
  CHECK(norm_weak_L1(zero) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(norm_S1(zero) == doctest::Approx(0.0).epsilon(1e-15));

  // A zero-mass marginal split into positive and negative parts.
  const GridDensity signed_phi = grid_from_function(n, [](double x) { return std::cos(2 * M_PI * x); });
  const auto sm = from_product(signed_phi, [](std::size_t) { return dirac(0.3); });
  CHECK(std::abs(sm.total_mass()) <= 1e-12);
  CHECK_THROWS_AS(from_product(signed_phi, [](std::size_t) { return dirac(0.3); }, true), Error);
}

TEST_CASE("strong norm of a height-2 step") {
  const std::size_t n = 1024;
  const GridDensity step = grid_from_function(n, [](double x) { return x < 0.5 ? 2.0 : 0.0; });
  const auto mu = from_product(step, [](std::size_t) { return dirac(0.0); }, true);
  const double var = var_1_1p(mu.marginal(), 1.0, 0.25);
  CHECK(var == doctest::Approx(4.0).epsilon(0.05));
  CHECK(l1_norm(mu.marginal()) == doctest::Approx(1.0));
  CHECK(norm_weak_L1(mu) == doctest::Approx(1.0));
  CHECK(norm_S1(mu) == doctest::Approx(var + 2.0).epsilon(1e-12));
}

TEST_CASE("path variation hand values") {
  const std::size_t n = 128;
  CHECK(path_variation(lebesgue_times_dirac(n, 0.0)) == 0.0);

  const auto moving = from_product(GridDensity(std::vector<double>(n, 1.0)),
                                   [n](std::size_t j) { return dirac((j + 0.5) / static_cast<double>(n)); });
  CHECK(std::abs(path_variation(moving) - 1.0) <= 1.0 / n);

  const GridDensity half = grid_from_function(n, [](double x) { return x < 0.5 ? 1.0 : 0.0; });
  const auto jump = from_product(half, [](std::size_t) { return dirac(0.0); }, true);
  CHECK(std::abs(path_variation(jump) - 1.0) <= 1.0 / n);
}

TEST_CASE("variation is additive, subadditive, scales with the base weight, bounds the sup") {
  Rng rng(2024);
  const std::size_t n = 48;
  for (int t = 0; t < 200; ++t) {
    const auto a = random_signed_measure(n, rng, 6);
    const auto b = random_signed_measure(n, rng, 6);

    // additivity over a two-interval partition sharing the cut cell.
    const std::size_t cut = 1 + rng.index(n - 2);
    CHECK(path_variation(a, 0, cut) + path_variation(a, cut, n - 1) ==
          doctest::Approx(path_variation(a)).epsilon(1e-12));

    // subadditivity
    CHECK(path_variation(linear_combination(a, 1.0, b, 1.0)) <= path_variation(a) + path_variation(b) + 1e-9);

    // positive base weight
    std::vector<double> phi(n);
    double sup_phi = 0.0, var_phi = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      phi[j] = rng.uniform(0.1, 2.0);
      sup_phi = std::max(sup_phi, phi[j]);
      if (j) var_phi += std::abs(phi[j] - phi[j - 1]);
    }
    double sup_cell = 0.0, mean_cell = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sup_cell = std::max(sup_cell, cell_w(a, j));
      mean_cell += cell_w(a, j) / static_cast<double>(n);
    }
    CHECK(path_variation(scale_cells(a, phi)) <= sup_phi * path_variation(a) + sup_cell * var_phi + 1e-9);

    // Sup bounded by variation plus mean.
    CHECK(sup_cell <= path_variation(a) + mean_cell + 1e-12);
  }
}

TEST_CASE("norm ordering on random measures") {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto mu = random_signed_measure(32, rng);
    CHECK(norm_weak_L1(mu) <= norm_Linf(mu) + 1e-12);
    CHECK(norm_weak_L1(mu) <= norm_S1(mu) + 1e-12);
    const auto p = random_probability_measure(32, rng);
    CHECK(norm_weak_L1(p) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(random_zero_mass_measure(32, rng).total_mass()) <= 1e-12);
  }
}

TEST_CASE("var diamond") {
  const auto xs = linspace(0.0, 1.0, 101);
  const auto ys = linspace(0.0, 1.0, 101);
  const VarDiamond flat = var_diamond([](double, double y) { return y / 3; }, xs, ys);
  CHECK(flat.sampled == doctest::Approx(0.0));
  CHECK(flat.surrogate == doctest::Approx(0.0));

  const double a = 1.0 / 3.0;
  const VarDiamond affine = var_diamond([a](double x, double y) { return a * y + (1 - a) * x; }, xs, ys);
  CHECK(affine.surrogate == doctest::Approx(1 - a).epsilon(1e-9));
  CHECK(affine.sampled <= affine.surrogate + 1e-12);

  // Single-branch Lorenz-like fiber map with horizontal constant H.
  const double H = 0.4;
  auto G = [H](double x, double y) { return 0.25 * y + H * 0.5 * (1 - std::cos(M_PI * x)) / (M_PI / 2); };
  const VarDiamond lz = var_diamond(G, xs, ys);
  CHECK(lz.surrogate <= H + 1e-9);
  CHECK(lz.sampled <= lz.surrogate + 1e-12);
}

TEST_CASE("measure CSV round trip") {
  Rng rng(4);
  const auto mu = random_signed_measure(16, rng);
  const auto path = (std::filesystem::temp_directory_path() / "fg_measure.csv").string();
  write_measure_csv(mu, path);
  const auto back = read_measure_csv(path);
  REQUIRE(back.size() == mu.size());
  CHECK(distance_L1(back, mu) == 0.0);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    CHECK(back.cell(j).phi_plus == mu.cell(j).phi_plus);
    CHECK(back.cell(j).phi_minus == mu.cell(j).phi_minus);
  }
}

TEST_CASE("fiber system checks") {
  for (const char* fam : {"doubling_affine", "trivial_product", "lorenz_cusp"}) {
    const FiberSystem F = make_system(default_spec(fam));
    const FiberSystemCheck c = check_fiber_system(F);
    CHECK(c.ok);
    CHECK(c.max_vertical_ratio <= F.alpha + 1e-12);
    CHECK(c.max_horizontal_ratio <= F.H + 1e-9);
  }
  FiberSystem bad = make_system(default_spec("trivial_product"));
  bad.G = [](double, double y) { return 0.9 * y; };
  CHECK_THROWS_AS(check_fiber_system(bad), Error);
  CHECK_FALSE(check_fiber_system(bad, 64, false).ok);

  SystemSpec s = default_spec("doubling_affine");
  s.q = {0.5, 1.0};  // leaves [0,1]
  CHECK_THROWS_AS(make_system(s), Error);
  CHECK_THROWS_AS(default_spec("tent"), Error);
}
