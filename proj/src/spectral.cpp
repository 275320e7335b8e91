#include "fibergap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "fibergap/error.hpp"

namespace fibergap {

InvariantResult invariant_measure(const TransferOperator& op, const DisintegratedMeasure& start, double tol,
                                  int n_max) {
  if (!(tol > 0.0)) throw Error(ErrorCode::kBadInput, "tol must be positive");
  InvariantResult res;
  DisintegratedMeasure cur = start;
  for (int k = 0; k < n_max; ++k) {
    DisintegratedMeasure next = op.apply(cur);
    const double inc = distance_L1(next, cur);
    res.increments.push_back(inc);
    if (inc < tol) {
      res.measure = std::move(cur);
      res.residual = inc;
      res.steps = k;
      res.converged = true;
      return res;
    }
    cur = std::move(next);
  }
  res.residual = distance_L1(op.apply(cur), cur);
  res.measure = std::move(cur);
  res.steps = n_max;
  res.converged = res.residual < tol;
  return res;
}

InvariantResult invariant_measure(const TransferOperator& op, double tol, int n_max) {
  return invariant_measure(op, lebesgue_square(op.n(), 32), tol, n_max);
}

EquilibriumRate equilibrium_rate(const TransferOperator& op, const std::vector<DisintegratedMeasure>& seeds, int n) {
  if (n < 4) throw Error(ErrorCode::kBadInput, "need at least 4 steps");
  if (seeds.empty()) throw Error(ErrorCode::kBadInput, "no seeds");
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const double m = seeds[s].total_mass();
    if (std::abs(m) > 1e-9) throw Error(ErrorCode::kPrecondition, fmt::format("seed {} has mass {}", s, m));
  }
  EquilibriumRate out;
  out.norms.assign(seeds.size(), std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0));
  std::vector<double> s1(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    DisintegratedMeasure cur = seeds[s];
    s1[s] = norm_S1(cur);
    out.norms[s][0] = norm_weak_L1(cur);
    for (int k = 1; k <= n; ++k) {
      cur = op.apply(cur);
      out.norms[s][static_cast<std::size_t>(k)] = norm_weak_L1(cur);
    }
  }
  for (const auto& row : out.norms) {
    const auto fit = fit_decay(row, static_cast<std::size_t>(n / 2), static_cast<std::size_t>(n));
    if (fit) out.beta1_hat = std::max(out.beta1_hat, fit->ratio);
  }
  if (out.beta1_hat >= 1.0 - 1e-9) {
    throw Error(ErrorCode::kNotDecaying, fmt::format("fitted ratio {} >= 1", out.beta1_hat));
  }
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (!(s1[s] > 0.0)) continue;
    for (std::size_t k = 0; k < out.norms[s].size(); ++k) {
      const double bk = std::pow(out.beta1_hat, static_cast<double>(k));
      if (bk > 0.0) out.D2_hat = std::max(out.D2_hat, out.norms[s][k] / (bk * s1[s]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kMeasured: return "measured";
    case Provenance::kFormula: return "formula";
    case Provenance::kConfigured: return "configured";
  }
  return "unknown";
}

void ConstantLedger::set(const std::string& key, double value, Provenance p) {
  for (LedgerEntry& e : entries_) {
    if (e.key == key) {
      e.value = value;
      e.provenance = p;
      return;
    }
  }
  entries_.push_back({key, value, p});
}

bool ConstantLedger::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const LedgerEntry& e) { return e.key == key; });
}

double ConstantLedger::get(const std::string& key) const {
  for (const LedgerEntry& e : entries_) {
    if (e.key == key) return e.value;
  }
  throw Error(ErrorCode::kBadInput, "ledger has no entry " + key);
}

std::string ConstantLedger::serialize() const {
  std::string out;
  for (const LedgerEntry& e : entries_) {
    out += fmt::format("{} = {} [{}]\n", e.key, e.value, provenance_name(e.provenance));
  }
  return out;
}

ConstantLedger ConstantLedger::parse(const std::string& text) {
  ConstantLedger l;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    const auto br = line.rfind(" [");
    if (eq == std::string::npos || br == std::string::npos || line.back() != ']' || br < eq) {
      throw Error(ErrorCode::kIoError, "bad ledger line: " + line);
    }
    const std::string key = line.substr(0, eq);
    const double v = std::strtod(line.substr(eq + 3, br - eq - 3).c_str(), nullptr);
    const std::string tag = line.substr(br + 2, line.size() - br - 3);
    Provenance p;
    if (tag == "measured") p = Provenance::kMeasured;
    else if (tag == "formula") p = Provenance::kFormula;
    else if (tag == "configured") p = Provenance::kConfigured;
    else throw Error(ErrorCode::kIoError, "bad provenance tag: " + tag);
    l.set(key, v, p);
  }
  return l;
}

void ConstantLedger::write(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << serialize();
}

namespace {

void check_rate(const char* name, double v) {
  if (!(v >= 0.0 && v < 1.0)) throw Error(ErrorCode::kBadInput, fmt::format("{} = {} must lie in [0,1)", name, v));
}

void fill_formulas(ConstantLedger& L) {
  const double alpha = L.get("alpha");
  const double r = L.get("r");
  const double D = L.get("D");
  const double beta0 = L.get("beta0");
  const double C = L.get("C");
  const double k = L.get("k");
  const double M1 = L.get("M1");
  const double p = L.get("p");
  const double A1 = L.get("A1");
  const double mu0 = L.get("mu0_S1");
  const auto F = Provenance::kFormula;

  const double lambda = std::pow(beta0, 1.0 / k);
  const double B3 = beta0 > 0.0 ? M1 / beta0 : std::numeric_limits<double>::infinity();
  const double Cbar = 1.0 + C;
  const double B2 = 1.0 + Cbar / (1.0 - beta0);
  const double alpha_bar = (1.0 + alpha) / (1.0 - alpha);
  const double beta1 = std::max(std::sqrt(alpha), std::sqrt(r));
  const double D2 = (1.0 + alpha_bar * D) / beta1;
  const double lambda0 = std::max(beta1, lambda);
  const double xi = std::sqrt(lambda0);
  const double K1 = std::pow(lambda0, -0.5) * (B3 * (B3 + B2) + B2 * D2);
  const double K = K1 * (1.0 + mu0);
  const double beta2 = lambda;
  const double C2 = C / (1.0 - beta0);
  const double alpha1 = std::max(alpha, beta2);
  const double HN = std::pow(A1, 1.0 / p - 1.0);
  const double A1p = B3 * (1.0 + 2.0 * HN) + HN * C2;
  const double B4 = C2 * (1.0 + HN);
  const double K2 = B3 + C2;

  L.set("lambda", lambda, F);
  L.set("A", B3, F);
  L.set("B3", B3, F);
  L.set("Cbar", Cbar, F);
  L.set("B2", B2, F);
  L.set("alpha_bar", alpha_bar, F);
  L.set("beta1", beta1, F);
  L.set("D2", D2, F);
  L.set("lambda0", lambda0, F);
  L.set("xi", xi, F);
  L.set("K1", K1, F);
  L.set("K", K, F);
  L.set("beta2", beta2, F);
  L.set("C2", C2, F);
  L.set("alpha1", alpha1, F);
  L.set("H_N", HN, F);
  L.set("A1_prime", A1p, F);
  L.set("B4", B4, F);
  L.set("K2", K2, F);
}

}  // namespace

ConstantLedger gap_constants(const GapInputs& in) {
  check_rate("alpha", in.alpha);
  check_rate("r", in.r);
  check_rate("beta0", in.beta0);
  if (in.k < 1) throw Error(ErrorCode::kBadInput, "k must be >= 1");
  if (!(in.D >= 0.0) || !(in.C >= 0.0) || !(in.M1 >= 0.0) || !(in.mu0_s1_norm >= 0.0)) {
    throw Error(ErrorCode::kBadInput, "D, C, M1 and the invariant-measure norm must be nonnegative");
  }
  if (!(in.p >= 1.0)) throw Error(ErrorCode::kBadExponent, fmt::format("p={} < 1", in.p));
  if (!(in.A1 > 0.0 && in.A1 <= 1.0)) throw Error(ErrorCode::kBadInput, "A1 outside (0,1]");
  ConstantLedger L;
  L.set("alpha", in.alpha, Provenance::kConfigured);
  L.set("r", in.r, Provenance::kMeasured);
  L.set("D", in.D, Provenance::kMeasured);
  L.set("beta0", in.beta0, Provenance::kMeasured);
  L.set("C", in.C, Provenance::kMeasured);
  L.set("k", in.k, Provenance::kConfigured);
  L.set("M1", in.M1, Provenance::kMeasured);
  L.set("p", in.p, Provenance::kConfigured);
  L.set("A1", in.A1, Provenance::kConfigured);
  L.set("mu0_S1", in.mu0_s1_norm, Provenance::kMeasured);
  fill_formulas(L);
  return L;
}

ConstantLedger recompute(const ConstantLedger& ledger) {
  ConstantLedger L = ledger;
  fill_formulas(L);
  return L;
}

std::vector<BranchData> branch_data(const PiecewiseExpandingMap& map, std::size_t samples) {
  std::vector<BranchData> out;
  for (std::size_t i = 0; i < map.branch_count(); ++i) {
    const Branch& b = map.branch(i);
    double sup = 0.0;
    double var = 0.0;
    double prev = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const double x = b.lo + (b.hi - b.lo) * static_cast<double>(s) / static_cast<double>(samples - 1);
      const double g = map.g(i, x);
      sup = std::max(sup, g);
      if (s > 0) var += std::abs(g - prev);
      prev = g;
    }
    out.push_back({sup, var, b.hi - b.lo});
  }
  return out;
}

double k3_constant(const std::vector<BranchData>& branches, double var_diamond_G) {
  double max_sup = 0.0;
  double max_term = 0.0;
  for (const BranchData& b : branches) {
    max_sup = std::max(max_sup, b.sup_g);
    max_term = std::max(max_term, (b.var_g + 2.0 * b.sup_g) / b.length);
  }
  return max_sup * var_diamond_G + max_term;
}

double c0_constant(double K3, double K2, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw Error(ErrorCode::kBadInput, fmt::format("beta = {} outside [0,1)", beta));
  return std::max(1.0, K3 * std::max(K2, 1.0) / (1.0 - beta));
}

GapDecayReport verify_gap_decay(const TransferOperator& op, double xi, double K,
                                const std::vector<DisintegratedMeasure>& seeds, int n, double slack) {
  GapDecayReport rep;
  rep.s1_norms.assign(seeds.size(), {});
  rep.ratios.assign(seeds.size(), {});
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (std::abs(seeds[s].total_mass()) > 1e-9) {
      throw Error(ErrorCode::kPrecondition, fmt::format("seed {} is not zero-mass", s));
    }
    DisintegratedMeasure cur = seeds[s];
    const double s0 = norm_S1(cur);
    for (int k = 0; k <= n; ++k) {
      if (k > 0) cur = op.apply(cur);
      const double sk = k == 0 ? s0 : norm_S1(cur);
      const double ratio = s0 > 0.0 ? sk / (std::pow(xi, k) * K * s0) : 0.0;
      rep.s1_norms[s].push_back(sk);
      rep.ratios[s].push_back(ratio);
      rep.max_ratio = std::max(rep.max_ratio, ratio);
      if (ratio > 1.0 + slack) rep.violations.push_back({s, k, ratio});
    }
  }
  return rep;
}

}  // namespace fibergap
