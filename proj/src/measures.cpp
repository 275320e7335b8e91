#include "fibergap/measures.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "fibergap/error.hpp"

namespace fibergap {

void SignedAtoms::add(double pos, double weight) {
  if (weight > 0.0) plus.push_back({pos, weight});
  else if (weight < 0.0) minus.push_back({pos, -weight});
}

double mass(const AtomList& atoms) {
  double s = 0.0;
  for (const PointMass& a : atoms) s += a.weight;
  return s;
}

double SignedAtoms::plus_mass() const { return mass(plus); }
double SignedAtoms::minus_mass() const { return mass(minus); }

SignedAtoms SignedAtoms::scaled(double c) const {
  SignedAtoms out;
  const AtomList& p = c >= 0.0 ? plus : minus;
  const AtomList& m = c >= 0.0 ? minus : plus;
  const double a = std::abs(c);
  if (a == 0.0) return out;
  for (const PointMass& x : p) out.plus.push_back({x.pos, x.weight * a});
  for (const PointMass& x : m) out.minus.push_back({x.pos, x.weight * a});
  return out;
}

void SignedAtoms::validate() const {
  for (const AtomList* part : {&plus, &minus}) {
    for (const PointMass& a : *part) {
      if (!(a.pos >= 0.0 && a.pos <= 1.0)) throw Error(ErrorCode::kBadInput, fmt::format("atom at {}", a.pos));
      if (!(a.weight > 0.0) || !std::isfinite(a.weight)) {
        throw Error(ErrorCode::kBadInput, fmt::format("atom weight {}", a.weight));
      }
    }
  }
}

SignedAtoms operator-(const SignedAtoms& a, const SignedAtoms& b) {
  SignedAtoms out = a;
  out.plus.insert(out.plus.end(), b.minus.begin(), b.minus.end());
  out.minus.insert(out.minus.end(), b.plus.begin(), b.plus.end());
  return out;
}

SignedAtoms operator+(const SignedAtoms& a, const SignedAtoms& b) {
  SignedAtoms out = a;
  out.plus.insert(out.plus.end(), b.plus.begin(), b.plus.end());
  out.minus.insert(out.minus.end(), b.minus.begin(), b.minus.end());
  return out;
}

namespace {

// Concave piecewise-linear function on [-1,1]: value v0 at -1, slope s0 on the
// first segment, then slope drops by `w` at each breakpoint. Breakpoints left
// of the maximiser live in L, the rest in R, each with a lazy shift.
class ConcaveChain {
 public:
  explicit ConcaveChain(double c) : v0_(-c), s0_(c) {}

  void add_linear(double c) {
    v0_ -= c;
    s0_ += c;
  }

  // f <- max over [t-d, t+d] intersected with [-1,1].
  void window(double d) {
    rebalance();
    if (L_.empty() && s0_ <= 0.0) {
      off_r_ += d;
      if (s0_ < 0.0) R_.push_front({-1.0 + d - off_r_, -s0_});
      s0_ = 0.0;
    } else {
      const double S = s0_ - sum_l_;
      const double target = -1.0 + d;
      double v = v0_;
      double slope = s0_;
      double cur = -1.0;
      while (!L_.empty() && L_.front().pos + off_l_ <= target) {
        const double p = L_.front().pos + off_l_;
        v += slope * (p - cur);
        cur = p;
        slope -= L_.front().weight;
        sum_l_ -= L_.front().weight;
        L_.pop_front();
      }
      if (L_.empty()) {
        slope = S;
        sum_l_ = 0.0;
      }
      v += slope * (target - cur);
      v0_ = v;
      s0_ = slope;
      off_l_ -= d;
      off_r_ += d;
      if (S > 0.0) R_.push_back({1.0 - d - off_r_, S});
    }
    while (!R_.empty() && R_.back().pos + off_r_ >= 1.0) R_.pop_back();
  }

  double max_value() const {
    double v = v0_;
    double slope = s0_;
    double cur = -1.0;
    auto walk = [&](const std::deque<PointMass>& q, double off) {
      for (const PointMass& b : q) {
        if (slope <= 0.0) return;
        const double p = b.pos + off;
        v += slope * (p - cur);
        cur = p;
        slope -= b.weight;
      }
    };
    walk(L_, off_l_);
    walk(R_, off_r_);
    if (slope > 0.0) v += slope * (1.0 - cur);
    return v;
  }

 private:
  void rebalance() {
    double S = s0_ - sum_l_;
    while (S < 0.0 && !L_.empty()) {
      PointMass b = L_.back();
      L_.pop_back();
      sum_l_ -= b.weight;
      const double before = S + b.weight;
      const double pos = b.pos + off_l_;
      if (before <= 0.0) {
        R_.push_front({pos - off_r_, b.weight});
        S = before;
      } else {
        L_.push_back({b.pos, before});
        sum_l_ += before;
        R_.push_front({pos - off_r_, -S});
        S = 0.0;
      }
    }
    if (L_.empty()) sum_l_ = 0.0;
    while (S > 0.0 && !R_.empty()) {
      PointMass b = R_.front();
      R_.pop_front();
      const double pos = b.pos + off_r_;
      if (b.weight <= S) {
        L_.push_back({pos - off_l_, b.weight});
        sum_l_ += b.weight;
        S -= b.weight;
      } else {
        L_.push_back({pos - off_l_, S});
        sum_l_ += S;
        R_.push_front({b.pos, b.weight - S});
        S = 0.0;
      }
    }
  }

  double v0_;
  double s0_;
  double sum_l_ = 0.0;
  double off_l_ = 0.0;
  double off_r_ = 0.0;
  std::deque<PointMass> L_;
  std::deque<PointMass> R_;
};

std::vector<PointMass> merge_sorted(std::vector<PointMass> pts) {
  std::sort(pts.begin(), pts.end(), [](const PointMass& a, const PointMass& b) { return a.pos < b.pos; });
  std::vector<PointMass> out;
  out.reserve(pts.size());
  for (const PointMass& p : pts) {
    if (!out.empty() && out.back().pos == p.pos) out.back().weight += p.weight;
    else out.push_back(p);
  }
  std::erase_if(out, [](const PointMass& p) { return p.weight == 0.0; });
  return out;
}

}  // namespace

double bl_norm_points(std::vector<PointMass> points) {
  const std::vector<PointMass> pts = merge_sorted(std::move(points));
  if (pts.empty()) return 0.0;
  ConcaveChain chain(pts[0].weight);
  for (std::size_t j = 1; j < pts.size(); ++j) {
    chain.window(pts[j].pos - pts[j - 1].pos);
    chain.add_linear(pts[j].weight);
  }
  return std::max(0.0, chain.max_value());
}

double bl_norm(const std::vector<AtomTerm>& terms) {
  std::size_t total = 0;
  for (const AtomTerm& t : terms) total += t.atoms->size();
  std::vector<PointMass> pts;
  pts.reserve(total);
  for (const AtomTerm& t : terms) {
    if (t.coef == 0.0) continue;
    for (const PointMass& a : *t.atoms) pts.push_back({a.pos, t.coef * a.weight});
  }
  return bl_norm_points(std::move(pts));
}

double bl_norm(const SignedAtoms& mu) { return bl_norm({{&mu.plus, 1.0}, {&mu.minus, -1.0}}); }

double bl_distance_equal_mass(const SignedAtoms& mu, const SignedAtoms& nu) {
  if (!mu.minus.empty() || !nu.minus.empty()) {
    throw Error(ErrorCode::kPrecondition, "CDF formula needs positive measures");
  }
  const double ma = mu.plus_mass();
  const double mb = nu.plus_mass();
  if (std::abs(ma - mb) > 1e-12 * std::max(1.0, std::max(ma, mb))) {
    throw Error(ErrorCode::kMassMismatch, fmt::format("masses {} and {}", ma, mb));
  }
  std::vector<PointMass> ev;
  ev.reserve(mu.size() + nu.size());
  for (const PointMass& a : mu.plus) ev.push_back(a);
  for (const PointMass& a : nu.plus) ev.push_back({a.pos, -a.weight});
  const std::vector<PointMass> pts = merge_sorted(std::move(ev));
  double cdf = 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
    cdf += pts[j].weight;
    total += std::abs(cdf) * (pts[j + 1].pos - pts[j].pos);
  }
  return total;
}

double bl_norm_oracle(const SignedAtoms& mu, std::size_t grid_n) {
  if (grid_n < 16) throw Error(ErrorCode::kBadInput, "oracle grid needs at least 16 points");
  const double h = 1.0 / static_cast<double>(grid_n - 1);
  // Snap atoms to grid points and accumulate signed coefficients.
  std::vector<double> coef(grid_n, 0.0);
  auto snap = [&](const AtomList& part, double sign) {
    for (const PointMass& a : part) {
      const auto k = static_cast<std::size_t>(std::llround(std::clamp(a.pos, 0.0, 1.0) / h));
      coef[std::min(k, grid_n - 1)] += sign * a.weight;
    }
  };
  snap(mu.plus, 1.0);
  snap(mu.minus, -1.0);

  // Values are lattice multiples l*h, |l| <= K; one grid step allows |dl| <= 1.
  const auto K = static_cast<std::ptrdiff_t>(grid_n - 1);
  const std::size_t levels = static_cast<std::size_t>(2 * K + 1);
  std::vector<double> V;
  std::vector<double> next(levels);
  std::size_t prev_k = 0;
  for (std::size_t k = 0; k < grid_n; ++k) {
    if (coef[k] == 0.0) continue;
    if (V.empty()) {
      V.assign(levels, 0.0);
    } else {
      const std::size_t m = k - prev_k;
      // Sliding-window max of width m on each side.
      std::deque<std::size_t> dq;
      std::size_t in = 0;
      for (std::size_t l = 0; l < levels; ++l) {
        const std::size_t hi = std::min(levels - 1, l + m);
        while (in <= hi) {
          while (!dq.empty() && V[dq.back()] <= V[in]) dq.pop_back();
          dq.push_back(in++);
        }
        const std::size_t lo = l >= m ? l - m : 0;
        while (dq.front() < lo) dq.pop_front();
        next[l] = V[dq.front()];
      }
      V.swap(next);
    }
    for (std::size_t l = 0; l < levels; ++l) {
      const double t = static_cast<double>(static_cast<std::ptrdiff_t>(l) - K) * h;
      V[l] += coef[k] * t;
    }
    prev_k = k;
  }
  if (V.empty()) return 0.0;
  return std::max(0.0, *std::max_element(V.begin(), V.end()));
}

AtomList push_forward(const AtomList& atoms, const std::function<double(double)>& g) {
  AtomList out;
  out.reserve(atoms.size());
  for (const PointMass& a : atoms) {
    double y = g(a.pos);
    if (!(y >= -1e-12 && y <= 1.0 + 1e-12)) {
      throw Error(ErrorCode::kRangeViolation, fmt::format("image {} of atom at {} leaves [0,1]", y, a.pos));
    }
    out.push_back({std::clamp(y, 0.0, 1.0), a.weight});
  }
  return out;
}

SignedAtoms push_forward(const SignedAtoms& mu, const std::function<double(double)>& g) {
  return {push_forward(mu.plus, g), push_forward(mu.minus, g)};
}

AtomList compact_atoms(AtomList atoms, double eta) {
  if (!(eta >= 0.0)) throw Error(ErrorCode::kBadInput, "merge radius must be >= 0");
  std::sort(atoms.begin(), atoms.end(), [](const PointMass& a, const PointMass& b) {
    return a.pos < b.pos || (a.pos == b.pos && a.weight < b.weight);
  });
  AtomList out;
  std::size_t i = 0;
  while (i < atoms.size()) {
    const double start = atoms[i].pos;
    double w = 0.0;
    double wx = 0.0;
    std::size_t j = i;
    while (j < atoms.size() && atoms[j].pos - start <= eta) {
      w += atoms[j].weight;
      wx += atoms[j].weight * atoms[j].pos;
      ++j;
    }
    if (w > 0.0) {
      const double last = atoms[j - 1].pos;
      out.push_back({j - i == 1 ? start : std::clamp(wx / w, start, last), w});
    }
    i = j;
  }
  return out;
}

SignedAtoms compact_atoms(const SignedAtoms& mu, double eta) {
  return {compact_atoms(mu.plus, eta), compact_atoms(mu.minus, eta)};
}

void write_atoms_csv(const SignedAtoms& mu, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << "position,weight,sign\n";
  for (const PointMass& a : mu.plus) os << fmt::format("{},{},plus\n", a.pos, a.weight);
  for (const PointMass& a : mu.minus) os << fmt::format("{},{},minus\n", a.pos, a.weight);
}

SignedAtoms read_atoms_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::string line;
  std::getline(is, line);
  if (line.rfind("position,weight,sign", 0) != 0) throw Error(ErrorCode::kIoError, "bad atoms header in " + path);
  SignedAtoms mu;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw Error(ErrorCode::kIoError, "bad atom row: " + line);
    const double pos = std::strtod(line.c_str(), nullptr);
    const double w = std::strtod(line.c_str() + c1 + 1, nullptr);
    const std::string sign = line.substr(c2 + 1);
    if (sign == "plus") mu.plus.push_back({pos, w});
    else if (sign == "minus") mu.minus.push_back({pos, w});
    else throw Error(ErrorCode::kIoError, "bad sign tag: " + sign);
  }
  mu.validate();
  return mu;
}

}  // namespace fibergap
