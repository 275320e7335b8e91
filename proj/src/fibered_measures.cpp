#include "fibergap/fibered_measures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "fibergap/error.hpp"
#include "fibergap/parallel.hpp"
#include "fibergap/rng.hpp"

namespace fibergap {

const AtomList& canonical_fiber() {
  static const AtomList fiber = uniform_atoms(8);
  return fiber;
}

AtomList uniform_atoms(std::size_t k) {
  AtomList a;
  a.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    a.push_back({(static_cast<double>(i) + 0.5) / static_cast<double>(k), 1.0 / static_cast<double>(k)});
  }
  return a;
}

AtomList dirac(double c) { return {{c, 1.0}}; }

SignedAtoms DisintegratedMeasure::restriction(std::size_t j) const {
  const FiberCell& c = cells_.at(j);
  SignedAtoms out;
  if (c.phi_plus != 0.0) {
    for (const PointMass& a : c.pi_plus) out.plus.push_back({a.pos, a.weight * c.phi_plus});
  }
  if (c.phi_minus != 0.0) {
    for (const PointMass& a : c.pi_minus) out.minus.push_back({a.pos, a.weight * c.phi_minus});
  }
  return out;
}

GridDensity DisintegratedMeasure::marginal() const {
  std::vector<double> v(cells_.size());
  for (std::size_t j = 0; j < cells_.size(); ++j) v[j] = cells_[j].phi_plus - cells_[j].phi_minus;
  return GridDensity(std::move(v), p_, A1_);
}

double DisintegratedMeasure::total_mass() const {
  if (cells_.empty()) return 0.0;
  double s = 0.0;
  for (const FiberCell& c : cells_) s += c.phi_plus - c.phi_minus;
  return s / static_cast<double>(cells_.size());
}

double DisintegratedMeasure::total_variation_mass() const {
  if (cells_.empty()) return 0.0;
  double s = 0.0;
  for (const FiberCell& c : cells_) s += c.phi_plus + c.phi_minus;
  return s / static_cast<double>(cells_.size());
}

std::size_t DisintegratedMeasure::atom_count() const {
  std::size_t s = 0;
  for (const FiberCell& c : cells_) s += c.pi_plus.size() + c.pi_minus.size();
  return s;
}

void DisintegratedMeasure::validate() const {
  for (std::size_t j = 0; j < cells_.size(); ++j) {
    const FiberCell& c = cells_[j];
    if (!std::isfinite(c.phi_plus) || !std::isfinite(c.phi_minus) || c.phi_plus < 0.0 || c.phi_minus < 0.0) {
      throw Error(ErrorCode::kBadDensity, fmt::format("cell {} has invalid weights", j));
    }
    for (const AtomList* part : {&c.pi_plus, &c.pi_minus}) {
      SignedAtoms{*part, {}}.validate();
      if (std::abs(mass(*part) - 1.0) > 1e-9) {
        throw Error(ErrorCode::kBadInput, fmt::format("fiber of cell {} has mass {}", j, mass(*part)));
      }
    }
  }
}

namespace {

AtomList checked_fiber(const FiberSampler& sampler, std::size_t j) {
  AtomList f = sampler(j);
  if (f.empty()) throw Error(ErrorCode::kBadInput, fmt::format("empty fiber for cell {}", j));
  if (std::abs(mass(f) - 1.0) > 1e-9) {
    throw Error(ErrorCode::kBadInput, fmt::format("fiber for cell {} is not a probability", j));
  }
  return f;
}

}  // namespace

DisintegratedMeasure from_parts(const GridDensity& phi_plus, const GridDensity& phi_minus, const FiberSampler& plus,
                                const FiberSampler& minus) {
  const std::size_t n = phi_plus.size();
  if (n < 2) throw Error(ErrorCode::kBadInput, "need at least 2 base cells");
  if (phi_minus.size() != n) throw Error(ErrorCode::kGridMismatch, "positive and negative parts differ in size");
  std::vector<FiberCell> cells(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = phi_plus.values[j];
    const double b = phi_minus.values[j];
    if (!(a >= 0.0) || !(b >= 0.0)) throw Error(ErrorCode::kBadDensity, fmt::format("negative part weight at {}", j));
    cells[j].phi_plus = a;
    cells[j].phi_minus = b;
    cells[j].pi_plus = a > 0.0 ? checked_fiber(plus, j) : canonical_fiber();
    cells[j].pi_minus = b > 0.0 ? checked_fiber(minus, j) : canonical_fiber();
  }
  return DisintegratedMeasure(std::move(cells), phi_plus.p, phi_plus.A1);
}

DisintegratedMeasure from_product(const GridDensity& phi, const FiberSampler& sampler, bool require_positive) {
  std::vector<double> pos(phi.size());
  std::vector<double> neg(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) {
    const double v = phi.values[j];
    if (!std::isfinite(v)) throw Error(ErrorCode::kBadDensity, "non-finite density");
    if (require_positive && v < 0.0) throw Error(ErrorCode::kBadDensity, fmt::format("negative cell {}", j));
    pos[j] = std::max(v, 0.0);
    neg[j] = std::max(-v, 0.0);
  }
  return from_parts(GridDensity(std::move(pos), phi.p, phi.A1), GridDensity(std::move(neg), phi.p, phi.A1), sampler,
                    sampler);
}

DisintegratedMeasure lebesgue_square(std::size_t n, std::size_t atoms, double p, double A1) {
  const AtomList u = uniform_atoms(atoms);
  return from_product(GridDensity(std::vector<double>(n, 1.0), p, A1), [&](std::size_t) { return u; }, true);
}

DisintegratedMeasure lebesgue_times_dirac(std::size_t n, double c, double p, double A1) {
  return from_product(GridDensity(std::vector<double>(n, 1.0), p, A1), [c](std::size_t) { return dirac(c); }, true);
}

namespace {

// Merge weighted fibers w_k * pi_k (w_k >= 0) into total weight and a probability.
void merge_into(double& weight, AtomList& fiber, const std::vector<std::pair<double, const AtomList*>>& parts) {
  weight = 0.0;
  for (const auto& [w, f] : parts) weight += w;
  fiber.clear();
  if (!(weight > 0.0)) {
    weight = 0.0;
    fiber = canonical_fiber();
    return;
  }
  for (const auto& [w, f] : parts) {
    if (w <= 0.0) continue;
    for (const PointMass& a : *f) fiber.push_back({a.pos, a.weight * w / weight});
  }
  fiber = compact_atoms(std::move(fiber), 0.0);
}

}  // namespace

DisintegratedMeasure linear_combination(const DisintegratedMeasure& a, double ca, const DisintegratedMeasure& b,
                                        double cb) {
  if (a.size() != b.size()) throw Error(ErrorCode::kGridMismatch, "measures on different grids");
  std::vector<FiberCell> cells(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    const FiberCell& x = a.cell(j);
    const FiberCell& y = b.cell(j);
    std::vector<std::pair<double, const AtomList*>> pos;
    std::vector<std::pair<double, const AtomList*>> neg;
    auto route = [&](double coef, const FiberCell& c) {
      if (coef == 0.0) return;
      auto& to_pos = coef > 0.0 ? pos : neg;
      auto& to_neg = coef > 0.0 ? neg : pos;
      const double s = std::abs(coef);
      if (c.phi_plus > 0.0) to_pos.emplace_back(s * c.phi_plus, &c.pi_plus);
      if (c.phi_minus > 0.0) to_neg.emplace_back(s * c.phi_minus, &c.pi_minus);
    };
    route(ca, x);
    route(cb, y);
    merge_into(cells[j].phi_plus, cells[j].pi_plus, pos);
    merge_into(cells[j].phi_minus, cells[j].pi_minus, neg);
  }
  return DisintegratedMeasure(std::move(cells), a.p(), a.A1());
}

double cell_norm(const DisintegratedMeasure& mu, std::size_t j) {
  const FiberCell& c = mu.cell(j);
  return bl_norm({{&c.pi_plus, c.phi_plus}, {&c.pi_minus, -c.phi_minus}});
}

namespace {

std::vector<double> all_cell_norms(const DisintegratedMeasure& mu) {
  std::vector<double> v(mu.size());
  parallel_for(mu.size(), [&](std::size_t j) { v[j] = cell_norm(mu, j); });
  return v;
}

}  // namespace

namespace {

std::vector<double> cell_distances(const DisintegratedMeasure& a, const DisintegratedMeasure& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kGridMismatch, "measures on different grids");
  std::vector<double> v(a.size());
  parallel_for(a.size(), [&](std::size_t j) {
    const FiberCell& x = a.cell(j);
    const FiberCell& y = b.cell(j);
    v[j] = bl_norm({{&x.pi_plus, x.phi_plus},
                    {&x.pi_minus, -x.phi_minus},
                    {&y.pi_plus, -y.phi_plus},
                    {&y.pi_minus, y.phi_minus}});
  });
  return v;
}

}  // namespace

double distance_L1(const DisintegratedMeasure& a, const DisintegratedMeasure& b) {
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (double v : cell_distances(a, b)) s += v;
  return s / static_cast<double>(a.size());
}

double distance_Linf(const DisintegratedMeasure& a, const DisintegratedMeasure& b) {
  double m = 0.0;
  for (double v : cell_distances(a, b)) m = std::max(m, v);
  return m;
}

double distance_S1(const DisintegratedMeasure& a, const DisintegratedMeasure& b) {
  GridDensity d = a.marginal();
  const GridDensity mb = b.marginal();
  for (std::size_t j = 0; j < d.size(); ++j) d.values[j] -= mb.values[j];
  return strong_norm(d) + distance_L1(a, b);
}

double norm_weak_L1(const DisintegratedMeasure& mu) {
  if (mu.size() == 0) return 0.0;
  double s = 0.0;
  for (double v : all_cell_norms(mu)) s += v;
  return s / static_cast<double>(mu.size());
}

double norm_Linf(const DisintegratedMeasure& mu) {
  double m = 0.0;
  for (double v : all_cell_norms(mu)) m = std::max(m, v);
  return m;
}

double norm_S1(const DisintegratedMeasure& mu) { return strong_norm(mu.marginal()) + norm_weak_L1(mu); }

double norm_Sinf(const DisintegratedMeasure& mu) { return strong_norm(mu.marginal()) + norm_Linf(mu); }

double path_variation(const DisintegratedMeasure& mu, std::size_t first, std::size_t last) {
  if (mu.size() == 0) return 0.0;
  if (last >= mu.size() || first > last) throw Error(ErrorCode::kBadInput, "bad path range");
  const std::size_t steps = last - first;
  std::vector<double> d(steps);
  parallel_for(steps, [&](std::size_t k) {
    const FiberCell& a = mu.cell(first + k);
    const FiberCell& b = mu.cell(first + k + 1);
    d[k] = bl_norm({{&b.pi_plus, b.phi_plus},
                    {&b.pi_minus, -b.phi_minus},
                    {&a.pi_plus, -a.phi_plus},
                    {&a.pi_minus, a.phi_minus}});
  });
  double s = 0.0;
  for (double v : d) s += v;
  return s;
}

double path_variation(const DisintegratedMeasure& mu) {
  if (mu.size() == 0) return 0.0;
  return path_variation(mu, 0, mu.size() - 1);
}

namespace {

GridDensity random_bv_density(std::size_t n, Rng& rng, double p, double A1) {
  const std::size_t jumps = 1 + rng.index(8);
  std::vector<double> cuts(jumps);
  for (double& c : cuts) c = rng.uniform();
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> levels(jumps + 1);
  for (double& l : levels) l = rng.uniform(0.2, 2.0);
  GridDensity g = grid_from_function(
      n,
      [&](double x) {
        const auto it = std::upper_bound(cuts.begin(), cuts.end(), x);
        return levels[static_cast<std::size_t>(it - cuts.begin())];
      },
      p, A1, 4);
  const double m = integral(g);
  for (double& v : g.values) v /= m;
  return g;
}

AtomList random_fiber(Rng& rng, std::size_t atoms) {
  const std::size_t k = 1 + rng.index(atoms);
  AtomList f(k);
  double total = 0.0;
  for (PointMass& a : f) {
    a.pos = rng.uniform();
    a.weight = rng.uniform(0.1, 1.0);
    total += a.weight;
  }
  for (PointMass& a : f) a.weight /= total;
  return compact_atoms(std::move(f), 0.0);
}

}  // namespace

DisintegratedMeasure random_probability_measure(std::size_t n, Rng& rng, std::size_t atoms, double p, double A1) {
  const GridDensity phi = random_bv_density(n, rng, p, A1);
  std::vector<AtomList> fibers(n);
  for (AtomList& f : fibers) f = random_fiber(rng, atoms);
  return from_product(phi, [&](std::size_t j) { return fibers[j]; }, true);
}

DisintegratedMeasure random_zero_mass_measure(std::size_t n, Rng& rng, std::size_t atoms, double p, double A1) {
  const DisintegratedMeasure a = random_probability_measure(n, rng, atoms, p, A1);
  const DisintegratedMeasure b = random_probability_measure(n, rng, atoms, p, A1);
  std::vector<FiberCell> cells(n);
  for (std::size_t j = 0; j < n; ++j) {
    cells[j].phi_plus = a.cell(j).phi_plus;
    cells[j].pi_plus = a.cell(j).pi_plus;
    cells[j].phi_minus = b.cell(j).phi_plus;
    cells[j].pi_minus = b.cell(j).pi_plus;
  }
  return DisintegratedMeasure(std::move(cells), p, A1);
}

DisintegratedMeasure random_signed_measure(std::size_t n, Rng& rng, std::size_t atoms, double p, double A1) {
  const DisintegratedMeasure a = random_probability_measure(n, rng, atoms, p, A1);
  const DisintegratedMeasure b = random_probability_measure(n, rng, atoms, p, A1);
  const double sa = rng.uniform(0.0, 2.0);
  const double sb = rng.uniform(0.0, 2.0);
  std::vector<FiberCell> cells(n);
  for (std::size_t j = 0; j < n; ++j) {
    cells[j].phi_plus = sa * a.cell(j).phi_plus;
    cells[j].pi_plus = a.cell(j).pi_plus;
    cells[j].phi_minus = sb * b.cell(j).phi_plus;
    cells[j].pi_minus = b.cell(j).pi_plus;
  }
  return DisintegratedMeasure(std::move(cells), p, A1);
}

std::vector<double> linspace(double a, double b, std::size_t count) {
  std::vector<double> v(count);
  if (count == 1) {
    v[0] = a;
    return v;
  }
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return v;
}

VarDiamond var_diamond(const std::function<double(double, double)>& G, const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  if (xs.size() < 2 || ys.size() < 2) throw Error(ErrorCode::kBadInput, "var_diamond needs grids of size >= 2");
  const std::size_t ny = ys.size();
  VarDiamond out{0.0, 0.0};
  // dp[l]: best sum so far with the current y index l (nondecreasing in i).
  std::vector<double> dp(ny, 0.0);
  std::vector<double> step(ny);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double row_max = 0.0;
    for (std::size_t l = 0; l < ny; ++l) {
      step[l] = std::abs(G(xs[i + 1], ys[l]) - G(xs[i], ys[l]));
      row_max = std::max(row_max, step[l]);
    }
    out.surrogate += row_max;
    double prefix = 0.0;
    for (std::size_t l = 0; l < ny; ++l) {
      prefix = std::max(prefix, dp[l]);
      dp[l] = prefix + step[l];
    }
  }
  out.sampled = *std::max_element(dp.begin(), dp.end());
  return out;
}

void write_measure_csv(const DisintegratedMeasure& mu, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << "cell_index,phi_plus,phi_minus,atom_position,atom_weight,atom_sign\n";
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const FiberCell& c = mu.cell(j);
    for (const PointMass& a : c.pi_plus) {
      os << fmt::format("{},{},{},{},{},plus\n", j, c.phi_plus, c.phi_minus, a.pos, a.weight);
    }
    for (const PointMass& a : c.pi_minus) {
      os << fmt::format("{},{},{},{},{},minus\n", j, c.phi_plus, c.phi_minus, a.pos, a.weight);
    }
  }
}

DisintegratedMeasure read_measure_csv(const std::string& path, double p, double A1) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::string line;
  std::getline(is, line);
  if (line.rfind("cell_index,phi_plus,phi_minus,atom_position,atom_weight,atom_sign", 0) != 0) {
    throw Error(ErrorCode::kIoError, "bad measure header in " + path);
  }
  std::vector<FiberCell> cells;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto c = line.find(',', start);
      f.push_back(line.substr(start, c - start));
      if (c == std::string::npos) break;
      start = c + 1;
    }
    if (f.size() != 6) throw Error(ErrorCode::kIoError, "bad measure row: " + line);
    const std::size_t j = std::stoul(f[0]);
    if (j >= cells.size()) {
      if (j != cells.size()) throw Error(ErrorCode::kIoError, "measure rows out of order");
      cells.emplace_back();
    }
    FiberCell& c = cells[j];
    c.phi_plus = std::strtod(f[1].c_str(), nullptr);
    c.phi_minus = std::strtod(f[2].c_str(), nullptr);
    const PointMass a{std::strtod(f[3].c_str(), nullptr), std::strtod(f[4].c_str(), nullptr)};
    if (f[5] == "plus") c.pi_plus.push_back(a);
    else if (f[5] == "minus") c.pi_minus.push_back(a);
    else throw Error(ErrorCode::kIoError, "bad sign tag: " + f[5]);
  }
  DisintegratedMeasure mu(std::move(cells), p, A1);
  mu.validate();
  return mu;
}

FiberSystemCheck check_fiber_system(const FiberSystem& F, std::size_t samples, bool throw_on_failure) {
  FiberSystemCheck out;
  const std::vector<double> ys = linspace(0.0, 1.0, samples);
  for (std::size_t b = 0; b < F.base.branch_count(); ++b) {
    const Branch& br = F.base.branch(b);
    const std::vector<double> xs = linspace(br.lo, br.hi, samples);
    for (std::size_t i = 0; i < samples; ++i) {
      for (std::size_t l = 0; l + 1 < samples; ++l) {
        const double dy = std::abs(F.G(xs[i], ys[l + 1]) - F.G(xs[i], ys[l])) / (ys[l + 1] - ys[l]);
        out.max_vertical_ratio = std::max(out.max_vertical_ratio, dy);
      }
      const double gv = F.G(xs[i], ys[i]);
      if (!(gv >= -1e-12 && gv <= 1.0 + 1e-12)) {
        if (throw_on_failure) throw Error(ErrorCode::kBadInput, fmt::format("G leaves [0,1] at x={}", xs[i]));
      }
    }
    for (std::size_t i = 0; i + 1 < samples; ++i) {
      for (std::size_t l = 0; l < samples; ++l) {
        const double dx = std::abs(F.G(xs[i + 1], ys[l]) - F.G(xs[i], ys[l])) / (xs[i + 1] - xs[i]);
        out.max_horizontal_ratio = std::max(out.max_horizontal_ratio, dx);
      }
    }
  }
  const double tol = 1e-9;
  out.ok = out.max_vertical_ratio <= F.alpha + tol && out.max_horizontal_ratio <= F.H + tol && F.alpha < 1.0;
  if (!out.ok && throw_on_failure) {
    throw Error(ErrorCode::kBadInput, fmt::format("fiber system {} fails sampled checks (|dG/dy| {} vs alpha {}, "
                                                  "|dG/dx| {} vs H {})",
                                                  F.name, out.max_vertical_ratio, F.alpha, out.max_horizontal_ratio,
                                                  F.H));
  }
  return out;
}

}  // namespace fibergap
