#pragma once

// Test-only oracles, implemented independently of the library code paths
// they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "pgdlab/linalg.hpp"

namespace oracles {

// Determinant via Gaussian elimination with partial pivoting.
inline double determinant(pgdlab::Matrix m) {
  const int n = m.rows();
  double det = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int row = col + 1; row < n; ++row)
      if (std::abs(m(row, col)) > std::abs(m(pivot, col))) pivot = row;
    if (m(pivot, col) == 0.0) return 0.0;
    if (pivot != col) {
      for (int j = 0; j < n; ++j) std::swap(m(pivot, j), m(col, j));
      det = -det;
    }
    det *= m(col, col);
    for (int row = col + 1; row < n; ++row) {
      const double factor = m(row, col) / m(col, col);
      for (int j = col; j < n; ++j) m(row, j) -= factor * m(col, j);
    }
  }
  return det;
}

// Eigenvalues of a symmetric matrix as roots of the characteristic
// polynomial p(lambda) = det(A - lambda I), located by a sign-change scan
// over the Gershgorin interval followed by bisection. Intended for small
// matrices whose eigenvalues are distinct.
inline std::vector<double> charpoly_eigenvalues(const pgdlab::SymMatrix& a,
                                                int grid = 200000) {
  const int n = a.dim();
  double lo = a(0, 0), hi = a(0, 0);
  for (int i = 0; i < n; ++i) {
    double radius = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) radius += std::abs(a(i, j));
    lo = std::min(lo, a(i, i) - radius);
    hi = std::max(hi, a(i, i) + radius);
  }
  const double pad = 1e-6 * (hi - lo + 1.0);
  lo -= pad;
  hi += pad;

  auto p = [&](double lambda) {
    pgdlab::Matrix shifted = a.as_matrix();
    for (int i = 0; i < n; ++i) shifted(i, i) -= lambda;
    return determinant(shifted);
  };

  std::vector<double> roots;
  double prev_x = lo;
  double prev_p = p(lo);
  for (int k = 1; k <= grid; ++k) {
    const double x = lo + (hi - lo) * k / grid;
    const double px = p(x);
    if (prev_p == 0.0) {
      roots.push_back(prev_x);
    } else if (px != 0.0 && std::signbit(px) != std::signbit(prev_p)) {
      double a_ = prev_x, b_ = x, pa = prev_p;
      for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (a_ + b_);
        const double pm = p(mid);
        if (pm == 0.0) {
          a_ = b_ = mid;
          break;
        }
        if (std::signbit(pm) == std::signbit(pa)) {
          a_ = mid;
          pa = pm;
        } else {
          b_ = mid;
        }
        if (b_ - a_ < 1e-13 * (1.0 + std::abs(mid))) break;
      }
      roots.push_back(0.5 * (a_ + b_));
    }
    prev_x = x;
    prev_p = px;
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Kolmogorov-Smirnov distance between a sample and a reference CDF.
template <class Cdf>
double ks_distance(std::vector<double> samples, Cdf cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Brute-force orthogonal Procrustes for factors with at most 3 columns:
// minimizes ||U - B R||_F over orthogonal R by grid search over a rotation
// parameterization (both determinant branches) plus coordinate-wise
// golden-section polish. Independent of any SVD-based route.
// ---------------------------------------------------------------------------

namespace detail {

inline pgdlab::Matrix rot2(double t) {
  pgdlab::Matrix r(2, 2);
  r(0, 0) = std::cos(t);
  r(0, 1) = -std::sin(t);
  r(1, 0) = std::sin(t);
  r(1, 1) = std::cos(t);
  return r;
}

// ZYZ Euler angles.
inline pgdlab::Matrix rot3(double a, double b, double c) {
  auto rz = [](double t) {
    pgdlab::Matrix r = pgdlab::Matrix::identity(3);
    r(0, 0) = std::cos(t);
    r(0, 1) = -std::sin(t);
    r(1, 0) = std::sin(t);
    r(1, 1) = std::cos(t);
    return r;
  };
  auto ry = [](double t) {
    pgdlab::Matrix r = pgdlab::Matrix::identity(3);
    r(0, 0) = std::cos(t);
    r(0, 2) = std::sin(t);
    r(2, 0) = -std::sin(t);
    r(2, 2) = std::cos(t);
    return r;
  };
  return rz(a) * ry(b) * rz(c);
}

inline pgdlab::Matrix flip_last(int n) {
  pgdlab::Matrix f = pgdlab::Matrix::identity(n);
  f(n - 1, n - 1) = -1.0;
  return f;
}

}  // namespace detail

inline double procrustes_distance_bruteforce(const pgdlab::Matrix& u,
                                             const pgdlab::Matrix& b) {
  const int r = u.cols();
  // ||U - B R||^2 = ||U||^2 + ||B||^2 - 2 tr(R^T B^T U)  (R orthogonal), so
  // only the linear term tr(R^T P) with P = B^T U needs maximizing.
  const pgdlab::Matrix p = pgdlab::transpose_times(b, u);
  const double base = pgdlab::frobenius_dot(u, u) + pgdlab::frobenius_dot(b, b);
  auto gain = [&](const pgdlab::Matrix& rot) { return pgdlab::frobenius_dot(rot, p); };
  auto dist_from_gain = [&](double g) { return std::sqrt(std::max(0.0, base - 2.0 * g)); };

  const double two_pi = 2.0 * std::acos(-1.0);
  double best = -std::numeric_limits<double>::infinity();

  if (r == 1) {
    best = std::abs(p(0, 0));
    return dist_from_gain(best);
  }

  if (r == 2) {
    for (int branch = 0; branch < 2; ++branch) {
      auto eval = [&](double t) {
        pgdlab::Matrix rot = detail::rot2(t);
        if (branch == 1) rot = rot * detail::flip_last(2);
        return gain(rot);
      };
      double best_t = 0.0, best_g = -std::numeric_limits<double>::infinity();
      const int n_grid = 2000;
      for (int i = 0; i < n_grid; ++i) {
        const double t = two_pi * i / n_grid;
        const double g = eval(t);
        if (g > best_g) {
          best_g = g;
          best_t = t;
        }
      }
      double lo = best_t - two_pi / n_grid, hi = best_t + two_pi / n_grid;
      const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int iter = 0; iter < 80; ++iter) {
        const double m1 = hi - golden * (hi - lo);
        const double m2 = lo + golden * (hi - lo);
        if (eval(m1) > eval(m2))
          hi = m2;
        else
          lo = m1;
      }
      best = std::max(best, eval(0.5 * (lo + hi)));
    }
    return dist_from_gain(best);
  }

  if (r == 3) {
    const double pi = std::acos(-1.0);
    for (int branch = 0; branch < 2; ++branch) {
      auto eval = [&](double a, double bb, double c) {
        pgdlab::Matrix rot = detail::rot3(a, bb, c);
        if (branch == 1) rot = rot * detail::flip_last(3);
        return gain(rot);
      };
      double ba = 0.0, bb = 0.0, bc = 0.0;
      double bg = -std::numeric_limits<double>::infinity();
      const int na = 36, nb = 18, nc = 36;
      for (int ia = 0; ia < na; ++ia)
        for (int ib = 0; ib <= nb; ++ib)
          for (int ic = 0; ic < nc; ++ic) {
            const double a = two_pi * ia / na;
            const double b_ = pi * ib / nb;
            const double c = two_pi * ic / nc;
            const double g = eval(a, b_, c);
            if (g > bg) {
              bg = g;
              ba = a;
              bb = b_;
              bc = c;
            }
          }
      // Shrinking full-3D grid refinement; robust to coupled coordinates.
      double width = std::max(two_pi / na, pi / nb);
      for (int round = 0; round < 30; ++round) {
        double na_ = ba, nb_ = bb, nc_ = bc, ng = bg;
        for (int ia = -2; ia <= 2; ++ia)
          for (int ib = -2; ib <= 2; ++ib)
            for (int ic = -2; ic <= 2; ++ic) {
              const double a = ba + width * ia / 2.0;
              const double b_ = bb + width * ib / 2.0;
              const double c = bc + width * ic / 2.0;
              const double g = eval(a, b_, c);
              if (g > ng) {
                ng = g;
                na_ = a;
                nb_ = b_;
                nc_ = c;
              }
            }
        ba = na_;
        bb = nb_;
        bc = nc_;
        bg = ng;
        width *= 0.4;
      }
      best = std::max(best, bg);
    }
    return dist_from_gain(best);
  }

  throw std::runtime_error("procrustes_distance_bruteforce: rank > 3 unsupported");
}

}  // namespace oracles
