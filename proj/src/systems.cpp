#include "fibergap/systems.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fibergap/error.hpp"

namespace fibergap {

SystemSpec default_spec(const std::string& family) {
  SystemSpec s;
  s.family = family;
  if (family == "doubling_affine") {
    s.alpha = 1.0 / 3.0;
    s.q = {0.0, 1.0};
  } else if (family == "trivial_product") {
    s.alpha = 0.5;
    s.q = {0.0};
  } else if (family == "lorenz_cusp") {
    s.kappa = 0.75;
    s.alpha = 0.25;
    s.q = {0.0, 1.0};
  } else {
    throw Error(ErrorCode::kConfigError, fmt::format("unknown system family '{}'", family));
  }
  return s;
}

double eval_poly(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

namespace {

double max_abs_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
  double m = 0.0;
  for (int i = 0; i <= 4096; ++i) m = std::max(m, std::abs(eval_poly(d, i / 4096.0)));
  return m;
}

}  // namespace

FiberSystem make_system(const SystemSpec& spec) {
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw Error(ErrorCode::kConfigError, fmt::format("alpha={} outside (0,1)", spec.alpha));
  }
  if (spec.q.empty()) throw Error(ErrorCode::kConfigError, "q needs at least one coefficient");
  for (int i = 0; i <= 1024; ++i) {
    const double v = eval_poly(spec.q, i / 1024.0);
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
      throw Error(ErrorCode::kConfigError, fmt::format("q({}) = {} leaves [0,1]", i / 1024.0, v));
    }
  }
  PiecewiseExpandingMap base = [&] {
    if (spec.family == "doubling_affine" || spec.family == "trivial_product") return doubling_map();
    if (spec.family == "lorenz_cusp") return lorenz_cusp_map(spec.kappa);
    throw Error(ErrorCode::kConfigError, fmt::format("unknown system family '{}'", spec.family));
  }();
  const double a = spec.alpha;
  const std::vector<double> q = spec.q;
  const double H = spec.H >= 0.0 ? spec.H : (1.0 - a) * max_abs_derivative(q);
  FiberSystem F{spec.family,
                std::move(base),
                [a, q](double x, double y) { return a * y + (1.0 - a) * eval_poly(q, x); },
                a,
                H,
                spec.atom_budget,
                spec.eta};
  check_fiber_system(F);
  return F;
}

}  // namespace fibergap
