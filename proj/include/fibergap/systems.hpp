#pragma once

#include <string>
#include <vector>

#include "fibergap/fibered_measures.hpp"

namespace fibergap {

// Bundled skew products use G(x,y) = alpha*y + (1-alpha)*q(x), q a polynomial
// mapping [0,1] into [0,1] (coefficients in increasing degree).
struct SystemSpec {
  std::string family = "doubling_affine";  // doubling_affine | trivial_product | lorenz_cusp
  double kappa = 0.75;
  double alpha = 1.0 / 3.0;
  std::vector<double> q{0.0, 1.0};
  double H = -1.0;  // negative: (1-alpha)*sup|q'|
  std::size_t atom_budget = 4096;
  double eta = 1e-5;

  bool operator==(const SystemSpec&) const = default;
};

// Family defaults: doubling_affine alpha=1/3, q=x; trivial_product
// alpha=1/2, q=0; lorenz_cusp kappa=0.75, alpha=1/4, q=x.
SystemSpec default_spec(const std::string& family);

double eval_poly(const std::vector<double>& c, double x);

FiberSystem make_system(const SystemSpec& spec);

}  // namespace fibergap
