#pragma once
// Independent reference computations for the tests. Nothing here calls the
// library's own evaluators.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

// Dense tableau simplex with Bland's rule for max c.u, A u <= b, u >= 0,
// b >= 0 (origin feasible). Returns the optimum.
inline double simplex_max(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                          const std::vector<double>& c) {
  const std::size_t m = A.size(), n = c.size();
  // Columns: n structural + m slack + rhs.
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(n + m + 1, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
    T[i][n + i] = 1.0;
    T[i][n + m] = b[i];
  }
  for (std::size_t j = 0; j < n; ++j) T[m][j] = -c[j];
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;
  const double eps = 1e-12;
  for (int iter = 0; iter < 100000; ++iter) {
    std::size_t enter = n + m;
    for (std::size_t j = 0; j < n + m; ++j) {
      if (T[m][j] < -eps) {
        enter = j;
        break;
      }
    }
    if (enter == n + m) break;
    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (T[i][enter] > eps) {
        const double r = T[i][n + m] / T[i][enter];
        if (r < best - 1e-15 || (std::abs(r - best) <= 1e-15 && leave < m && basis[i] < basis[leave])) {
          best = r;
          leave = i;
        }
      }
    }
    if (leave == m) return std::numeric_limits<double>::infinity();
    const double piv = T[leave][enter];
    for (double& v : T[leave]) v /= piv;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == leave || T[i][enter] == 0.0) continue;
      const double f = T[i][enter];
      for (std::size_t j = 0; j <= n + m; ++j) T[i][j] -= f * T[leave][j];
    }
    basis[leave] = enter;
  }
  return T[m][n + m];
}

struct Atom {
  double pos;
  double w;  // signed
};

// sup sum w_j g(x_j) over |g| <= 1, Lip(g) <= 1, via g = u - 1, u in [0,2].
inline double bl_norm_simplex(const std::vector<Atom>& atoms) {
  const std::size_t n = atoms.size();
  if (n == 0) return 0.0;
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> row(n, 0.0);
    row[j] = 1.0;
    A.push_back(row);
    b.push_back(2.0);
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      if (j == k) continue;
      std::vector<double> row(n, 0.0);
      row[j] = 1.0;
      row[k] = -1.0;
      A.push_back(row);
      b.push_back(std::abs(atoms[j].pos - atoms[k].pos));
    }
  }
  std::vector<double> c(n);
  double shift = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    c[j] = atoms[j].w;
    shift += atoms[j].w;
  }
  return simplex_max(A, b, c) - shift;
}

// integral over [0,1] of |F_a(t) - F_b(t)| by brute-force sampling of t.
inline double cdf_distance_sampled(const std::vector<Atom>& a, const std::vector<Atom>& b, std::size_t samples) {
  double s = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
    double fa = 0.0, fb = 0.0;
    for (const Atom& x : a) fa += x.pos <= t ? x.w : 0.0;
    for (const Atom& x : b) fb += x.pos <= t ? x.w : 0.0;
    s += std::abs(fa - fb);
  }
  return s / static_cast<double>(samples);
}

// Dense quadrature of int osc(f, B_eps(x)) dx for a function given
// pointwise, oscillation taken over `inner` samples of the ball.
inline double osc1_quadrature(const std::function<double(double)>& f, double eps, std::size_t outer,
                              std::size_t inner) {
  double s = 0.0;
  for (std::size_t i = 0; i < outer; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(outer);
    const double lo = std::max(0.0, x - eps), hi = std::min(1.0, x + eps);
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (std::size_t k = 0; k <= inner; ++k) {
      const double v = f(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(inner));
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    s += mx - mn;
  }
  return s / static_cast<double>(outer);
}

// Ulam matrix by forward sampling: M[i][j] ~ fraction of samples of cell i
// landing in cell j.
inline std::vector<double> ulam_sampled(const std::function<double(double)>& T, std::size_t n, std::size_t per_cell) {
  std::vector<double> M(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < per_cell; ++s) {
      const double x = (static_cast<double>(i) + (static_cast<double>(s) + 0.5) / static_cast<double>(per_cell)) /
                       static_cast<double>(n);
      const double y = std::clamp(T(x), 0.0, 1.0);
      const std::size_t j = std::min(n - 1, static_cast<std::size_t>(y * static_cast<double>(n)));
      M[i * n + j] += 1.0 / static_cast<double>(per_cell);
    }
  }
  return M;
}

}  // namespace oracle
