#include "fibergap/interval_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "fibergap/error.hpp"
#include "fibergap/parallel.hpp"
#include "fibergap/rng.hpp"

namespace fibergap {

namespace {

constexpr double kCoverTol = 1e-14;
constexpr double kInverseTol = 1e-12;
constexpr std::size_t kValidationSamples = 64;

// Branch containing x with the half-open convention [lo, hi), last closed.
// Used for orbits, where landing on a partition point is harmless.
std::size_t locate(const PiecewiseExpandingMap& map, double x) {
  const std::size_t q = map.branch_count();
  for (std::size_t i = 0; i + 1 < q; ++i) {
    if (x < map.branch(i).hi) return i;
  }
  return q - 1;
}

double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

}  // namespace

PiecewiseExpandingMap::PiecewiseExpandingMap(std::string name, std::vector<Branch> branches)
    : name_(std::move(name)), branches_(std::move(branches)) {
  if (branches_.empty()) throw Error(ErrorCode::kBadInput, "map has no branches");
  std::sort(branches_.begin(), branches_.end(), [](const Branch& a, const Branch& b) { return a.lo < b.lo; });
  if (std::abs(branches_.front().lo) > kCoverTol || std::abs(branches_.back().hi - 1.0) > kCoverTol) {
    throw Error(ErrorCode::kBadInput, "branch domains do not cover [0,1]");
  }
  branches_.front().lo = 0.0;
  branches_.back().hi = 1.0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    Branch& b = branches_[i];
    if (!b.value || !b.derivative || !b.inverse) throw Error(ErrorCode::kBadInput, "branch callable missing");
    if (!(b.hi > b.lo)) throw Error(ErrorCode::kBadInput, fmt::format("empty branch domain {}", i));
    if (i + 1 < branches_.size()) {
      if (std::abs(b.hi - branches_[i + 1].lo) > kCoverTol) {
        throw Error(ErrorCode::kBadInput, fmt::format("gap or overlap after branch {}", i));
      }
      branches_[i + 1].lo = b.hi;
    }
  }

  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const Branch& b = branches_[i];
    const double v_lo = b.value(b.lo);
    const double v_hi = b.value(b.hi);
    const bool inc = v_hi > v_lo;
    increasing_.push_back(inc);
    image_lo_.push_back(std::clamp(std::min(v_lo, v_hi), 0.0, 1.0));
    image_hi_.push_back(std::clamp(std::max(v_lo, v_hi), 0.0, 1.0));

    double prev = v_lo;
    for (std::size_t s = 1; s <= kValidationSamples; ++s) {
      const double x = b.lo + (b.hi - b.lo) * static_cast<double>(s) / (kValidationSamples + 1);
      const double y = b.value(x);
      if (!std::isfinite(y) || y < -kCoverTol || y > 1.0 + kCoverTol) {
        throw Error(ErrorCode::kBadInput, fmt::format("branch {} leaves [0,1] at x={}", i, x));
      }
      if (inc ? !(y > prev) : !(y < prev)) {
        throw Error(ErrorCode::kBadInput, fmt::format("branch {} not strictly monotone near x={}", i, x));
      }
      prev = y;
      const double back = b.inverse(y);
      if (!(std::abs(back - x) <= kInverseTol)) {
        throw Error(ErrorCode::kBadInput,
                    fmt::format("branch {} inverse mismatch at x={} (got {})", i, x, back));
      }
    }
    const double d_lo = std::abs(b.derivative(b.lo));
    const double d_hi = std::abs(b.derivative(b.hi));
    if (!std::isfinite(d_lo) || !std::isfinite(d_hi)) singular_ = true;
  }
}

BranchPoint PiecewiseExpandingMap::branch_at(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::kOutOfDomain, fmt::format("x={} not in [0,1]", x));
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const Branch& b = branches_[i];
    if (x == b.lo || x == b.hi) throw Error(ErrorCode::kBoundaryPoint, fmt::format("x={} is a partition point", x));
    if (x > b.lo && x < b.hi) return {i, b.value(x), b.derivative(x)};
  }
  throw Error(ErrorCode::kOutOfDomain, fmt::format("x={} not in any branch", x));
}

InverseBranches PiecewiseExpandingMap::inverse_branches(double y) const {
  if (!(y >= 0.0 && y <= 1.0)) throw Error(ErrorCode::kOutOfDomain, fmt::format("y={} not in [0,1]", y));
  InverseBranches out;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    if (y < image_lo_[i] || y > image_hi_[i]) continue;
    const Branch& b = branches_[i];
    const double x = std::clamp(b.inverse(y), b.lo, b.hi);
    const double g = 1.0 / std::abs(b.derivative(x));
    if (!std::isfinite(g) || !(g > 0.0)) {
      ++out.dropped_singular;
      continue;
    }
    out.entries.push_back({x, g, i});
  }
  return out;
}

double PiecewiseExpandingMap::g(std::size_t branch, double x) const {
  const double d = std::abs(branches_.at(branch).derivative(x));
  if (!std::isfinite(d)) return 0.0;
  return 1.0 / d;
}

PiecewiseExpandingMap doubling_map() {
  std::vector<Branch> b(2);
  b[0] = {0.0, 0.5, [](double x) { return 2.0 * x; }, [](double) { return 2.0; },
          [](double y) { return 0.5 * y; }};
  b[1] = {0.5, 1.0, [](double x) { return 2.0 * x - 1.0; }, [](double) { return 2.0; },
          [](double y) { return 0.5 * y + 0.5; }};
  return PiecewiseExpandingMap("doubling", std::move(b));
}

PiecewiseExpandingMap lorenz_cusp_map(double kappa) {
  if (!(kappa > 0.5 && kappa < 1.0)) {
    throw Error(ErrorCode::kBadInput, fmt::format("cusp exponent kappa={} must lie in (1/2,1)", kappa));
  }
  // Distances to the cusp are clamped at 0: conjugated copies evaluate the
  // branches a rounding error outside their domain.
  std::vector<Branch> b(2);
  b[0] = {0.0, 0.5, [kappa](double x) { return 1.0 - std::pow(std::max(0.0, 1.0 - 2.0 * x), kappa); },
          [kappa](double x) { return 2.0 * kappa * std::pow(std::max(0.0, 1.0 - 2.0 * x), kappa - 1.0); },
          [kappa](double y) { return 0.5 * (1.0 - std::pow(std::max(0.0, 1.0 - y), 1.0 / kappa)); }};
  b[1] = {0.5, 1.0, [kappa](double x) { return std::pow(std::max(0.0, 2.0 * x - 1.0), kappa); },
          [kappa](double x) { return 2.0 * kappa * std::pow(std::max(0.0, 2.0 * x - 1.0), kappa - 1.0); },
          [kappa](double y) { return 0.5 * (1.0 + std::pow(std::max(0.0, y), 1.0 / kappa)); }};
  return PiecewiseExpandingMap(fmt::format("lorenz_cusp(kappa={})", kappa), std::move(b));
}

PiecewiseExpandingMap identity_map() {
  std::vector<Branch> b(1);
  b[0] = {0.0, 1.0, [](double x) { return x; }, [](double) { return 1.0; }, [](double y) { return y; }};
  return PiecewiseExpandingMap("identity", std::move(b));
}

PiecewiseExpandingMap conjugated_map(const PiecewiseExpandingMap& base, const Conjugator& sigma, std::string name) {
  // Partition points are pulled back once so neighbouring branches share them.
  const std::size_t q = base.branch_count();
  std::vector<double> cuts(q + 1);
  cuts[0] = 0.0;
  cuts[q] = 1.0;
  for (std::size_t i = 1; i < q; ++i) cuts[i] = sigma.sigma_inverse(base.branch(i).lo);

  std::vector<Branch> out(q);
  for (std::size_t i = 0; i < q; ++i) {
    const Branch b = base.branch(i);
    out[i].lo = cuts[i];
    out[i].hi = cuts[i + 1];
    out[i].value = [b, s = sigma.sigma](double x) { return b.value(s(x)); };
    out[i].derivative = [b, s = sigma.sigma, ds = sigma.sigma_prime](double x) {
      return b.derivative(s(x)) * ds(x);
    };
    out[i].inverse = [b, si = sigma.sigma_inverse](double y) { return si(b.inverse(y)); };
  }
  return PiecewiseExpandingMap(std::move(name), std::move(out));
}

ExpansionReport check_expansion(const PiecewiseExpandingMap& map, int n0_max, std::size_t samples_per_branch) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < map.branch_count(); ++i) {
    const Branch& b = map.branch(i);
    for (std::size_t s = 0; s < samples_per_branch; ++s) {
      xs.push_back(b.lo + (b.hi - b.lo) * (static_cast<double>(s) + 0.5) / static_cast<double>(samples_per_branch));
    }
  }
  ExpansionReport best;
  for (int n0 = 1; n0 <= n0_max; ++n0) {
    double inf = std::numeric_limits<double>::infinity();
    for (double x0 : xs) {
      double x = x0;
      double d = 1.0;
      for (int m = 0; m < n0; ++m) {
        const std::size_t i = locate(map, x);
        d *= std::abs(map.branch(i).derivative(x));
        x = std::clamp(map.branch(i).value(x), 0.0, 1.0);
      }
      inf = std::min(inf, d);
    }
    if (n0 == 1 || inf > best.lambda1) {
      best.n0 = n0;
      best.lambda1 = inf;
    }
    if (inf > 1.0) {
      best = {n0, inf, true};
      return best;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

std::size_t cell_of(double x, std::size_t n) {
  if (!(x > 0.0)) return 0;
  const double t = std::floor(x * static_cast<double>(n));
  if (t >= static_cast<double>(n)) return n - 1;
  return static_cast<std::size_t>(t);
}

double integral(const GridDensity& phi) {
  double s = 0.0;
  for (double v : phi.values) s += v;
  return phi.values.empty() ? 0.0 : s / static_cast<double>(phi.size());
}

double l1_norm(const GridDensity& phi) {
  double s = 0.0;
  for (double v : phi.values) s += std::abs(v);
  return phi.values.empty() ? 0.0 : s / static_cast<double>(phi.size());
}

GridDensity grid_from_function(std::size_t n, const std::function<double(double)>& f, double p, double A1,
                               std::size_t subsamples) {
  if (n == 0 || subsamples == 0) throw Error(ErrorCode::kBadInput, "empty grid");
  std::vector<double> v(n);
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < subsamples; ++k) {
      s += f((static_cast<double>(i) + (static_cast<double>(k) + 0.5) / static_cast<double>(subsamples)) * h);
    }
    v[i] = s / static_cast<double>(subsamples);
  }
  return GridDensity(std::move(v), p, A1);
}

void write_density_csv(const GridDensity& phi, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << "cell_index,value\n";
  for (std::size_t i = 0; i < phi.size(); ++i) os << fmt::format("{},{}\n", i, phi.values[i]);
}

GridDensity read_density_csv(const std::string& path, double p, double A1) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::string line;
  std::getline(is, line);
  if (line.rfind("cell_index,value", 0) != 0) throw Error(ErrorCode::kIoError, "bad density header in " + path);
  std::vector<double> v;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::kIoError, "bad density row: " + line);
    const std::size_t idx = std::stoul(line.substr(0, comma));
    if (idx != v.size()) throw Error(ErrorCode::kIoError, "density rows out of order");
    v.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
  }
  return GridDensity(std::move(v), p, A1);
}

// ---------------------------------------------------------------------------

PreimagePlan build_preimage_plan(const PiecewiseExpandingMap& map, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::kBadInput, "grid needs at least one cell");
  const double dn = static_cast<double>(n);
  std::vector<std::vector<PreimagePiece>> per_target(n);

  for (std::size_t bi = 0; bi < map.branch_count(); ++bi) {
    const Branch& b = map.branch(bi);
    const double ylo = map.image_lo(bi);
    const double yhi = map.image_hi(bi);
    if (!(yhi > ylo)) continue;
    const bool inc = map.increasing(bi);
    const std::size_t j_first = cell_of(ylo, n);
    std::size_t j_last = cell_of(yhi, n);
    if (j_last > j_first && static_cast<double>(j_last) / dn >= yhi) --j_last;

    // Preimages of the cell boundaries clipped to the branch image; the
    // image endpoints map exactly to the branch endpoints.
    auto preimage = [&](double y) {
      if (y <= ylo) return inc ? b.lo : b.hi;
      if (y >= yhi) return inc ? b.hi : b.lo;
      return std::clamp(b.inverse(y), b.lo, b.hi);
    };
    double x_prev = preimage(std::max(ylo, static_cast<double>(j_first) / dn));
    for (std::size_t j = j_first; j <= j_last; ++j) {
      const double x_next = preimage(std::min(yhi, static_cast<double>(j + 1) / dn));
      double u = std::min(x_prev, x_next);
      const double v = std::max(x_prev, x_next);
      x_prev = x_next;
      if (!(v > u)) continue;
      // Split along source cells.
      std::size_t c = cell_of(u, n);
      while (u < v) {
        const double edge = std::min(v, static_cast<double>(c + 1) / dn);
        const double w = (c + 1 >= n) ? v : edge;
        if (w > u) {
          per_target[j].push_back({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(bi), u, w});
        }
        u = w;
        ++c;
        if (c >= n) break;
      }
    }
  }

  PreimagePlan plan;
  plan.n = n;
  plan.offsets.resize(n + 1, 0);
  for (std::size_t j = 0; j < n; ++j) plan.offsets[j + 1] = plan.offsets[j] + per_target[j].size();
  plan.pieces.reserve(plan.offsets[n]);
  for (auto& v : per_target) plan.pieces.insert(plan.pieces.end(), v.begin(), v.end());
  return plan;
}

namespace {

std::vector<double> limited_slopes(const GridDensity& phi, Reconstruction recon) {
  const std::size_t n = phi.size();
  std::vector<double> s(n, 0.0);
  if (recon == Reconstruction::kConstant || n < 2) return s;
  const double h = phi.cell_width();
  const auto& v = phi.values;
  for (std::size_t c = 1; c + 1 < n; ++c) s[c] = minmod((v[c] - v[c - 1]) / h, (v[c + 1] - v[c]) / h);
  s[0] = (v[1] - v[0]) / h;
  s[n - 1] = (v[n - 1] - v[n - 2]) / h;
  // End cells: keep the outer edge value on the same side of zero as the mean.
  const double e0 = v[0] - 0.5 * h * s[0];
  if ((v[0] >= 0.0 && e0 < 0.0) || (v[0] <= 0.0 && e0 > 0.0)) s[0] = 2.0 * v[0] / h;
  const double e1 = v[n - 1] + 0.5 * h * s[n - 1];
  if ((v[n - 1] >= 0.0 && e1 < 0.0) || (v[n - 1] <= 0.0 && e1 > 0.0)) s[n - 1] = -2.0 * v[n - 1] / h;
  return s;
}

}  // namespace

GridDensity pf_density(const PreimagePlan& plan, const GridDensity& phi, Reconstruction recon) {
  if (phi.size() != plan.n) {
    throw Error(ErrorCode::kGridMismatch, fmt::format("density has {} cells, plan {}", phi.size(), plan.n));
  }
  for (double v : phi.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kBadDensity, "non-finite density value");
  }
  const std::size_t n = plan.n;
  const double h = phi.cell_width();
  const std::vector<double> slope = limited_slopes(phi, recon);
  std::vector<double> out(n, 0.0);
  parallel_for(n, [&](std::size_t j) {
    double acc = 0.0;
    for (std::size_t k = plan.offsets[j]; k < plan.offsets[j + 1]; ++k) {
      const PreimagePiece& pc = plan.pieces[k];
      const double len = pc.x_hi - pc.x_lo;
      const double mid_piece = 0.5 * (pc.x_lo + pc.x_hi);
      const double mid_cell = (static_cast<double>(pc.source) + 0.5) * h;
      acc += len * (phi.values[pc.source] + slope[pc.source] * (mid_piece - mid_cell));
    }
    out[j] = acc / h;
  });
  return GridDensity(std::move(out), phi.p, phi.A1);
}

GridDensity pf_density(const PiecewiseExpandingMap& map, const GridDensity& phi, Reconstruction recon) {
  return pf_density(build_preimage_plan(map, phi.size()), phi, recon);
}

GridDensity pf_density_midpoint(const PiecewiseExpandingMap& map, const GridDensity& phi,
                                std::size_t* dropped_singular) {
  const std::size_t n = phi.size();
  std::vector<double> out(n, 0.0);
  std::vector<std::size_t> dropped(n, 0);
  parallel_for(n, [&](std::size_t j) {
    const InverseBranches inv = map.inverse_branches(phi.midpoint(j));
    double acc = 0.0;
    for (const Preimage& pre : inv.entries) acc += phi.values[cell_of(pre.x, n)] * pre.g;
    out[j] = acc;
    dropped[j] = inv.dropped_singular;
  });
  if (dropped_singular) {
    *dropped_singular = 0;
    for (std::size_t d : dropped) *dropped_singular += d;
  }
  return GridDensity(std::move(out), phi.p, phi.A1);
}

std::vector<double> ulam_matrix(const PiecewiseExpandingMap& map, std::size_t n) {
  if (n < 2) throw Error(ErrorCode::kBadInput, "ulam matrix needs n >= 2");
  const double dn = static_cast<double>(n);
  std::vector<double> m(n * n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const double a = static_cast<double>(i) / dn;
    const double b = static_cast<double>(i + 1) / dn;
    for (std::size_t bi = 0; bi < map.branch_count(); ++bi) {
      const Branch& br = map.branch(bi);
      const double u = std::max(a, br.lo);
      const double v = std::min(b, br.hi);
      if (!(v > u)) continue;
      const double fu = br.value(u);
      const double fv = br.value(v);
      const bool inc = fv > fu;
      const double ymin = std::min(fu, fv);
      const double ymax = std::max(fu, fv);
      std::vector<double> cuts{u, v};
      for (std::size_t t = cell_of(ymin, n) + 1; t < n && static_cast<double>(t) / dn < ymax; ++t) {
        const double target = static_cast<double>(t) / dn;
        if (target <= ymin) continue;
        double lo = u;
        double hi = v;
        for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          const bool below = br.value(mid) < target;
          if (below == inc) lo = mid; else hi = mid;
        }
        cuts.push_back(0.5 * (lo + hi));
      }
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double len = cuts[k + 1] - cuts[k];
        if (!(len > 0.0)) continue;
        const double y = std::clamp(br.value(0.5 * (cuts[k] + cuts[k + 1])), 0.0, 1.0);
        m[i * n + cell_of(y, n)] += len * dn;
      }
    }
  });
  return m;
}

GridDensity apply_ulam_transpose(const std::vector<double>& ulam, const GridDensity& phi) {
  const std::size_t n = phi.size();
  if (ulam.size() != n * n) throw Error(ErrorCode::kGridMismatch, "ulam matrix size does not match density");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += ulam[i * n + j] * phi.values[i];
  }
  return GridDensity(std::move(out), phi.p, phi.A1);
}

// ---------------------------------------------------------------------------

double osc1(const GridDensity& phi, double eps) {
  if (!(eps > 0.0) || eps > phi.A1 * (1.0 + 1e-12)) {
    throw Error(ErrorCode::kBadRadius, fmt::format("eps={} outside (0, A1={}]", eps, phi.A1));
  }
  const std::size_t n = phi.size();
  if (n == 0) return 0.0;
  const double h = phi.cell_width();
  const auto& v = phi.values;
  // Windows of cells meeting the open ball around each midpoint; both ends
  // are nondecreasing in i, so monotone deques give O(n).
  std::deque<std::size_t> maxq;
  std::deque<std::size_t> minq;
  std::size_t next = 0;
  double total = 0.0;
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = phi.midpoint(i);
    const auto lo = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(std::floor((x - eps) / h)), 0, last));
    const auto hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(std::ceil((x + eps) / h)) - 1, 0, last));
    while (next <= hi) {
      while (!maxq.empty() && v[maxq.back()] <= v[next]) maxq.pop_back();
      maxq.push_back(next);
      while (!minq.empty() && v[minq.back()] >= v[next]) minq.pop_back();
      minq.push_back(next);
      ++next;
    }
    while (maxq.front() < lo) maxq.pop_front();
    while (minq.front() < lo) minq.pop_front();
    total += v[maxq.front()] - v[minq.front()];
  }
  return total * h;
}

double var_1_1p(const GridDensity& phi, double p, double A1) {
  if (!(p >= 1.0)) throw Error(ErrorCode::kBadExponent, fmt::format("p={} < 1", p));
  if (!(A1 > 0.0 && A1 <= 1.0)) throw Error(ErrorCode::kBadRadius, fmt::format("A1={} outside (0,1]", A1));
  if (phi.size() == 0) return 0.0;
  GridDensity view(phi.values, p, A1);
  const double h = phi.cell_width();
  double best = 0.0;
  auto consider = [&](double eps) { best = std::max(best, std::pow(eps, -1.0 / p) * osc1(view, eps)); };
  for (double eps = h; eps < A1; eps *= 2.0) consider(eps);
  consider(A1);
  return best;
}

double strong_norm(const GridDensity& phi) { return var_1_1p(phi, phi.p, phi.A1) + l1_norm(phi); }

// ---------------------------------------------------------------------------

Est1Result est1_quantity(const PiecewiseExpandingMap& map, int k, std::size_t samples_per_cylinder) {
  if (k < 1) throw Error(ErrorCode::kBadInput, "iterate count must be >= 1");
  const std::size_t q = map.branch_count();
  const double count = std::pow(static_cast<double>(q), k);
  if (count > kMaxCylinders) {
    throw Error(ErrorCode::kCylinderBlowup, fmt::format("{}^{} cylinders exceed the cap", q, k));
  }
  const auto words = static_cast<std::size_t>(count);
  const std::size_t samples = std::max<std::size_t>(samples_per_cylinder, 2);
  std::vector<CylinderReport> reports(words);
  std::vector<char> valid(words, 0);

  parallel_for(words, [&](std::size_t w) {
    std::vector<std::uint32_t> word(static_cast<std::size_t>(k));
    std::size_t code = w;
    for (int m = k - 1; m >= 0; --m) {
      word[static_cast<std::size_t>(m)] = static_cast<std::uint32_t>(code % q);
      code /= q;
    }
    // Pull the interval back from the last symbol to the first.
    double lo = 0.0;
    double hi = 1.0;
    for (int m = k - 1; m >= 0; --m) {
      const std::size_t bi = word[static_cast<std::size_t>(m)];
      const Branch& b = map.branch(bi);
      const double ylo = std::max(lo, map.image_lo(bi));
      const double yhi = std::min(hi, map.image_hi(bi));
      if (!(yhi > ylo)) return;
      const double a = std::clamp(b.inverse(ylo), b.lo, b.hi);
      const double c = std::clamp(b.inverse(yhi), b.lo, b.hi);
      lo = std::min(a, c);
      hi = std::max(a, c);
      if (!(hi > lo)) return;
    }
    double sup = 0.0;
    double var = 0.0;
    double prev = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      double x = lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(samples - 1);
      double gk = 1.0;
      for (int m = 0; m < k; ++m) {
        const std::size_t bi = word[static_cast<std::size_t>(m)];
        const Branch& b = map.branch(bi);
        x = std::clamp(x, b.lo, b.hi);
        gk *= map.g(bi, x);
        x = std::clamp(b.value(x), 0.0, 1.0);
      }
      sup = std::max(sup, gk);
      if (s > 0) var += std::abs(gk - prev);
      prev = gk;
    }
    reports[w] = {word, lo, hi, sup, var};
    valid[w] = 1;
  });

  Est1Result res;
  res.k = k;
  for (std::size_t w = 0; w < words; ++w) {
    if (!valid[w]) continue;
    res.est1 = std::max(res.est1, reports[w].var_g + 3.0 * reports[w].sup_g);
    res.cylinders.push_back(std::move(reports[w]));
  }
  return res;
}

int select_iterate(const PiecewiseExpandingMap& map, int k_max) {
  double last = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    last = est1_quantity(map, k).est1;
    if (last < 1.0) return k;
  }
  throw Error(ErrorCode::kInsufficientIterate, fmt::format("est1 = {} >= 1 at k = {}", last, k_max));
}

std::vector<GridDensity> test_density_library(std::size_t n, double p, double A1) {
  using F = std::function<double(double)>;
  std::vector<F> fs;
  for (auto [a, b] : {std::pair{0.0, 0.5}, {0.0, 0.25}, {0.0, 0.7}, {0.3, 0.6}}) {
    fs.emplace_back([a, b](double x) { return (x >= a && x < b) ? 1.0 : 0.0; });
  }
  fs.emplace_back([](double x) { return x; });
  fs.emplace_back([](double x) { return 1.0 - x; });
  fs.emplace_back([](double x) { return std::max(0.0, 1.0 - 4.0 * std::abs(x - 0.5)); });
  fs.emplace_back([](double x) { return std::abs(2.0 * x - 1.0); });
  for (int k : {1, 2, 4, 8}) {
    fs.emplace_back([k](double x) { return 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * k * x); });
  }
  Rng rng(20240601);
  for (int r = 0; r < 8; ++r) {
    std::vector<double> cuts(8);
    for (double& c : cuts) c = rng.uniform();
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> levels(cuts.size() + 1);
    for (double& l : levels) l = rng.uniform(0.0, 2.0);
    fs.emplace_back([cuts, levels](double x) {
      const auto it = std::upper_bound(cuts.begin(), cuts.end(), x);
      return levels[static_cast<std::size_t>(it - cuts.begin())];
    });
  }
  std::vector<GridDensity> lib;
  lib.reserve(fs.size());
  for (const F& f : fs) lib.push_back(grid_from_function(n, f, p, A1, 16));
  return lib;
}

LyBaseConstants ly_base_constants(const PiecewiseExpandingMap& map, int k, const LyOptions& opts) {
  Est1Result est = est1_quantity(map, k);
  if (est.est1 >= 1.0) {
    throw Error(ErrorCode::kInsufficientIterate, fmt::format("est1 = {} >= 1 at k = {}", est.est1, k));
  }
  LyBaseConstants out;
  out.k = k;
  out.est1 = est.est1;
  out.beta0 = est.est1;
  out.cylinders = std::move(est.cylinders);

  const auto lib = test_density_library(opts.n, opts.p, opts.A1);
  const PreimagePlan plan = build_preimage_plan(map, opts.n);
  std::vector<double> resid(lib.size(), 0.0);
  std::vector<double> power(lib.size(), 1.0);
  for (std::size_t i = 0; i < lib.size(); ++i) {
    const GridDensity& f = lib[i];
    const double s0 = strong_norm(f);
    GridDensity cur = f;
    for (int r = 1; r <= k; ++r) {
      cur = pf_density(plan, cur, opts.recon);
      if (r < k) power[i] = std::max(power[i], strong_norm(cur) / s0);
    }
    resid[i] = (strong_norm(cur) - out.beta0 * s0) / l1_norm(f);
  }
  out.C = 0.0;
  out.M1 = 1.0;
  for (std::size_t i = 0; i < lib.size(); ++i) {
    out.C = std::max(out.C, resid[i]);
    out.M1 = std::max(out.M1, power[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

LogLinearFit fit_geometric(const std::vector<double>& values, std::size_t first, std::size_t last) {
  if (last >= values.size() || last <= first) throw Error(ErrorCode::kInsufficientData, "fit window too short");
  const double m = static_cast<double>(last - first + 1);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::vector<double> ly(values.size());
  for (std::size_t k = first; k <= last; ++k) {
    const double x = static_cast<double>(k);
    const double y = std::log(std::max(values[k], std::numeric_limits<double>::min()));
    ly[k] = y;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / m;
  double rss = 0.0;
  for (std::size_t k = first; k <= last; ++k) {
    const double e = ly[k] - (icpt + slope * static_cast<double>(k));
    rss += e * e;
  }
  return {std::exp(slope), icpt, std::sqrt(rss / m)};
}

std::optional<LogLinearFit> fit_decay(const std::vector<double>& values, std::size_t first, std::size_t last,
                                      double rel_floor) {
  if (last >= values.size()) throw Error(ErrorCode::kInsufficientData, "fit window past the data");
  const double top = *std::max_element(values.begin(), values.end());
  const double floor = rel_floor * top;
  std::size_t end = first;
  while (end + 1 <= last && values[end + 1] > floor) ++end;
  if (!(values[first] > floor) || end < first + 2) return std::nullopt;
  return fit_geometric(values, first, end);
}

RateEstimate base_convergence_rate(const PiecewiseExpandingMap& map, const std::vector<GridDensity>& seeds,
                                   int n_max, Reconstruction recon) {
  if (n_max < 4) throw Error(ErrorCode::kBadInput, "n_max must be >= 4");
  if (seeds.empty()) throw Error(ErrorCode::kBadInput, "no seeds");
  const std::size_t n = seeds.front().size();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (seeds[s].size() != n) throw Error(ErrorCode::kGridMismatch, "seeds on different grids");
    const double mass = integral(seeds[s]);
    if (std::abs(mass) > 1e-9) {
      throw Error(ErrorCode::kPrecondition, fmt::format("seed {} has mass {}", s, mass));
    }
  }
  const PreimagePlan plan = build_preimage_plan(map, n);
  RateEstimate est;
  est.norms.assign(seeds.size(), std::vector<double>(static_cast<std::size_t>(n_max) + 1, 0.0));
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    GridDensity cur = seeds[s];
    est.norms[s][0] = strong_norm(cur);
    for (int k = 1; k <= n_max; ++k) {
      cur = pf_density(plan, cur, recon);
      est.norms[s][static_cast<std::size_t>(k)] = strong_norm(cur);
    }
  }
  const auto first = static_cast<std::size_t>(n_max / 2);
  const auto last = static_cast<std::size_t>(n_max);
  for (const auto& row : est.norms) {
    const auto fit = fit_decay(row, first, last);
    if (!fit) continue;
    est.r = std::max(est.r, fit->ratio);
    est.fit_residual = std::max(est.fit_residual, fit->rms_residual);
  }
  if (est.r >= 1.0 - 1e-9) {
    throw Error(ErrorCode::kNotDecaying, fmt::format("fitted ratio r = {} >= 1 over {} steps", est.r, n_max));
  }
  for (const auto& row : est.norms) {
    if (!(row[0] > 0.0)) continue;
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double rk = std::pow(est.r, static_cast<double>(k));
      if (rk > 0.0) est.D = std::max(est.D, row[k] / (rk * row[0]));
    }
  }
  return est;
}

}  // namespace fibergap
