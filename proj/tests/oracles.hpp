#pragma once

// Slow, direct re-implementations used to check the library. Nothing here
// calls into the code under test except plain data types.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "mcrf/raster.hpp"

namespace oracle {

// Ordered-pair counts F[i][j][k-1] over every a != b with the lag in bin k,
// bin k covering [(k-0.5)w, (k+0.5)w).
inline std::vector<std::uint64_t> pair_counts(const mcrf::SampleSet& s, double w, int n_bins, double pixel = 1.0) {
  const int n = s.n_classes();
  std::vector<std::uint64_t> f(static_cast<std::size_t>(n * n * n_bins), 0);
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (a == b) continue;
      const double d = std::hypot(s[b].x - s[a].x, s[b].y - s[a].y) / pixel;
      for (int k = 1; k <= n_bins; ++k)
        if ((k - 0.5) * w <= d && d < (k + 0.5) * w) {
          ++f[static_cast<std::size_t>((s[a].cls * n + s[b].cls) * n_bins + (k - 1))];
          break;
        }
    }
  return f;
}

struct QuadrantHit {
  int row = -1, col = -1;
  std::int64_t d2 = -1;
};

// Nearest known cell in each angular quadrant by scanning the whole grid.
// Quadrant q covers angles [90q, 90q + 90) measured from the target.
inline std::array<QuadrantHit, 4> nearest_per_quadrant(const mcrf::Raster& g, int tr, int tc, double radius) {
  std::array<QuadrantHit, 4> best{};
  for (int r = 0; r < g.nrows(); ++r)
    for (int c = 0; c < g.ncols(); ++c) {
      if ((r == tr && c == tc) || g.at(r, c) < 0) continue;
      const int dx = c - tc, dy = r - tr;
      const std::int64_t d2 = static_cast<std::int64_t>(dx) * dx + static_cast<std::int64_t>(dy) * dy;
      if (static_cast<double>(d2) > radius * radius) continue;
      double ang = std::atan2(static_cast<double>(dy), static_cast<double>(dx)) * 180.0 / std::numbers::pi;
      if (ang < 0) ang += 360.0;
      const int q = static_cast<int>(ang / 90.0);
      auto& b = best[static_cast<std::size_t>(q)];
      // row-major scan order already prefers the lower (row, col) on ties
      if (b.d2 < 0 || d2 < b.d2) b = {r, c, d2};
    }
  return best;
}

// ---------------------------------------------------------------------------
// Model formulas, written out independently.

inline double exp_auto(double c, double d, double h) { return c + (1.0 - c) * std::exp(-3.0 * h / d); }
inline double exp_cross(double c, double d, double h) { return -c * std::expm1(-3.0 * h / d); }
inline double gauss_cross(double c, double d, double h) { return -c * std::expm1(-9.0 * h * h / (d * d)); }
inline double sph_cross(double c, double d, double h) {
  if (h >= d) return c;
  const double x = h / d;
  return c * x * (1.5 - 0.5 * x * x);
}

// Lanczos (g = 7, n = 9) with the reflection formula; ~1e-15 relative.
inline double lanczos_gamma(double x) {
  static constexpr double g = 7.0;
  static constexpr double p[] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                 771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                 -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
  x -= 1.0;
  double a = p[0];
  const double t = x + g + 0.5;
  for (int i = 1; i < 9; ++i) a += p[i] / (x + i);
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

inline double gamma_density(double x, double alpha, double theta) {
  if (x <= 0.0) return alpha == 1.0 ? 1.0 / theta : 0.0;
  return std::exp((alpha - 1.0) * std::log(x) - x / theta - alpha * std::log(theta)) / lanczos_gamma(alpha);
}

// kind: 0 exponential, 1 gaussian, 2 spherical base
inline double gamma_composite(int kind, double c, double d, double a, double t, double w, double h) {
  const double x = h / d;
  double base = 0.0;
  if (kind == 0) base = -std::expm1(-3.0 * x);
  else if (kind == 1) base = -std::expm1(-9.0 * x * x);
  else base = x >= 1.0 ? 1.0 : x * (1.5 - 0.5 * x * x);
  return c * (base + w * gamma_density(x, a, t));
}

// ---------------------------------------------------------------------------

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps, int depth = 50) {
  const auto simpson = [&](double lo, double hi, double flo, double fmid, double fhi) {
    return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
  };
  const std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double e, int dep) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = simpson(lo, mid, flo, flm, fmid);
        const double right = simpson(mid, hi, fmid, frm, fhi);
        if (dep <= 0 || std::abs(left + right - whole) <= 15.0 * e) return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, e / 2.0, dep - 1) + rec(mid, hi, fmid, frm, fhi, right, e / 2.0, dep - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), eps, depth);
}

// Peaked integrands can fool the first Simpson estimate, so start from many
// panels.
inline double integrate(const std::function<double(double)>& f, double a, double b, double eps, int panels = 256) {
  double sum = 0.0;
  const double step = (b - a) / panels;
  for (int i = 0; i < panels; ++i) sum += adaptive_simpson(f, a + i * step, a + (i + 1) * step, eps / panels);
  return sum;
}

// ---------------------------------------------------------------------------
// Four-neighbour conditional distribution written straight from the formula:
// P(k) proportional to p[l1][k](h1) * prod_{i>=2} p[k][li](hi).
// `p(i, j, h)` supplies transition probabilities.

struct Datum {
  int cls = 0;
  double lag = 0.0;
};

inline std::vector<double> direct_cpd(int n, const std::vector<Datum>& nb, std::size_t from,
                                      const std::function<double(int, int, double)>& p) {
  std::vector<double> num(static_cast<std::size_t>(n));
  double den = 0.0;
  for (int k = 0; k < n; ++k) {
    double v = p(nb[from].cls, k, nb[from].lag);
    for (std::size_t i = 0; i < nb.size(); ++i)
      if (i != from) v *= p(k, nb[i].cls, nb[i].lag);
    num[static_cast<std::size_t>(k)] = v;
    den += v;
  }
  for (double& v : num) v /= den;
  return num;
}

}  // namespace oracle
