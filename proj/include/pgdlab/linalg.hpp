#pragma once

// Dense linear algebra and randomness substrate for desk-scale problems:
// vectors, symmetric matrices, Jacobi eigendecomposition, Gram-matrix SVD
// for small factors, and seeded uniform ball sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "pgdlab/errors.hpp"

namespace pgdlab {

using Vector = std::vector<double>;

// Accuracy targets of the routines below, exposed read-only so tests and
// callers can assert against the same numbers.
namespace tolerances {
inline constexpr double symmetry_rel = 1e-12;        // SymMatrix asymmetry after construction
inline constexpr double eigen_residual_rel = 1e-9;   // ||A v - lambda v|| / ||A||
inline constexpr double eigen_orthonormal = 1e-10;   // ||V^T V - I||_max
inline constexpr double svd_residual_rel = 1e-9;     // ||U D V^T - A|| / ||A||
inline constexpr double svd_transpose_sv = 1e-10;    // sv agreement between A and A^T
inline constexpr double psd_check = 1e-10;           // eigenvalue floor for "is PSD"
}  // namespace tolerances

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

inline bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Four accumulators break the FP dependency chain; fixed summation order
// keeps results deterministic.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double dot(const Vector& a, const Vector& b) { return dot(a.data(), b.data(), a.size()); }

inline double norm_sq(const Vector& v) { return dot(v, v); }

inline double norm(const Vector& v) { return std::sqrt(norm_sq(v)); }

inline double inf_norm(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// y += a * x
inline void axpy(double a, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Vector scaled(const Vector& v, double a) {
  Vector out(v);
  for (double& x : out) x *= a;
  return out;
}

inline Vector add(const Vector& a, const Vector& b) {
  Vector out(a);
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

inline Vector sub(const Vector& a, const Vector& b) {
  Vector out(a);
  for (std::size_t i = 0; i < b.size(); ++i) out[i] -= b[i];
  return out;
}

inline double distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Dense matrix (row-major)
// ---------------------------------------------------------------------------

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw invalid_parameter_error("Matrix: negative dimension");
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  const double& operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool finite() const {
    for (double x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw invalid_parameter_error("Matrix product: shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw invalid_parameter_error("Matrix difference: shape mismatch");
  Matrix c = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c(i, j) -= b(i, j);
  return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw invalid_parameter_error("Matrix sum: shape mismatch");
  Matrix c = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
  return c;
}

inline Matrix scaled(const Matrix& a, double s) {
  Matrix c = a;
  for (double& x : c.data()) x *= s;
  return c;
}

// A^T B
inline Matrix transpose_times(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw invalid_parameter_error("transpose_times: shape mismatch");
  Matrix c(a.cols(), b.cols());
  for (int k = 0; k < a.rows(); ++k)
    for (int i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  return c;
}

// A B^T
inline Matrix times_transpose(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw invalid_parameter_error("times_transpose: shape mismatch");
  Matrix c(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  return c;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return std::sqrt(s);
}

inline double frobenius_dot(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double trace(const Matrix& a) {
  double s = 0.0;
  for (int i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

// ---------------------------------------------------------------------------
// Symmetric matrix: symmetrized on construction, stays exactly symmetric.
// ---------------------------------------------------------------------------

class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n) : m_(n, n) {}

  // Accepts any square matrix and stores (m + m^T)/2.
  explicit SymMatrix(const Matrix& m) : m_(m.rows(), m.cols()) {
    if (m.rows() != m.cols()) throw invalid_parameter_error("SymMatrix: matrix not square");
    if (!m.finite()) throw invalid_input_error("SymMatrix: non-finite entry");
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m_(i, j) = 0.5 * (m(i, j) + m(j, i));
  }

  static SymMatrix diagonal(const Vector& d) {
    SymMatrix s(static_cast<int>(d.size()));
    for (int i = 0; i < s.dim(); ++i) s.m_(i, i) = d[static_cast<std::size_t>(i)];
    return s;
  }

  static SymMatrix identity(int n) { return SymMatrix(Matrix::identity(n)); }

  int dim() const { return m_.rows(); }

  double operator()(int i, int j) const { return m_(i, j); }

  void set(int i, int j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  const Matrix& as_matrix() const { return m_; }

  double trace() const { return pgdlab::trace(m_); }
  double frobenius_norm() const { return pgdlab::frobenius_norm(m_); }

  Vector multiply(const Vector& x) const {
    Vector y(static_cast<std::size_t>(dim()), 0.0);
    for (int i = 0; i < dim(); ++i) {
      double s = 0.0;
      for (int j = 0; j < dim(); ++j) s += m_(i, j) * x[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = s;
    }
    return y;
  }

 private:
  Matrix m_;
};

// ---------------------------------------------------------------------------
// Seeded deterministic PRNG: xoshiro256++ seeded through splitmix64.
// Identical seeds reproduce identical streams; every consumer owns its
// state, so independent trials derive sub-streams instead of sharing.
// ---------------------------------------------------------------------------

class RngState {
 public:
  static constexpr const char* algorithm = "xoshiro256++";

  explicit RngState(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; draws two uniforms per call.
  double next_gaussian() {
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Independent sub-stream for trial `index`; deterministic in (seed, index).
  RngState derive(std::uint64_t index) const {
    std::uint64_t x = seed_;
    std::uint64_t a = splitmix64(x);
    std::uint64_t y = index + 0x9e3779b97f4a7c15ull;
    std::uint64_t b = splitmix64(y);
    return RngState(a ^ (b + 0x2545f4914f6cdd1dull));
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
};

// Uniform sample from the closed ball of the given radius, via the scaled
// Gaussian direction U^(1/d) * Y / ||Y||.
inline Vector sample_ball(int dim, double radius, RngState& rng) {
  if (dim < 1) throw invalid_parameter_error("sample_ball: dimension must be >= 1");
  if (radius < 0.0) throw invalid_parameter_error("sample_ball: radius must be >= 0");
  Vector x(static_cast<std::size_t>(dim), 0.0);
  if (radius == 0.0) return x;
  double n = 0.0;
  do {
    for (double& xi : x) xi = rng.next_gaussian();
    n = norm(x);
  } while (n == 0.0);
  const double u = rng.next_double();
  const double scale = radius * std::pow(u, 1.0 / dim) / n;
  for (double& xi : x) xi *= scale;
  return x;
}

// ---------------------------------------------------------------------------
// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues in ascending order with matching orthonormal
// eigenvector columns; ties keep their pre-sort order so the smallest
// original index wins. Eigenvector signs are canonicalized (entry of
// largest magnitude is positive).
// ---------------------------------------------------------------------------

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column i pairs with values[i]
};

inline EigenDecomposition sym_eigen(const SymMatrix& input) {
  if (!input.as_matrix().finite()) throw invalid_input_error("sym_eigen: non-finite entry");
  const int n = input.dim();
  Matrix a = input.as_matrix();
  Matrix v = Matrix::identity(n);

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) off += std::abs(a(p, q));
    if (off == 0.0) break;

    // Skip tiny elements early on, as in the classic threshold scheme.
    const double thresh = (sweep < 3) ? 0.2 * off / (n * n) : 0.0;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(a(p, p)) + g == std::abs(a(p, p)) &&
            std::abs(a(q, q)) + g == std::abs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        if (std::abs(apq) <= thresh) continue;

        const double h = a(q, q) - a(p, p);
        double t;
        if (std::abs(h) + g == std::abs(h)) {
          t = apq / h;
        } else {
          const double theta = 0.5 * h / apq;
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double change = t * apq;

        a(p, p) -= change;
        a(q, q) += change;
        a(p, q) = a(q, p) = 0.0;
        auto rotate = [&](Matrix& m, int i, int j, int k, int l) {
          const double mij = m(i, j);
          const double mkl = m(k, l);
          m(i, j) = mij - s * (mkl + mij * tau);
          m(k, l) = mkl + s * (mij - mkl * tau);
        };
        for (int j = 0; j < p; ++j) rotate(a, j, p, j, q);
        for (int j = p + 1; j < q; ++j) rotate(a, p, j, j, q);
        for (int j = q + 1; j < n; ++j) rotate(a, p, j, q, j);
        for (int j = 0; j < n; ++j) rotate(v, j, p, j, q);
      }
    }
  }

  // Sort ascending; stable so equal eigenvalues keep the lowest index first.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) < a(j, j); });

  EigenDecomposition out;
  out.values.resize(static_cast<std::size_t>(n));
  out.vectors = Matrix(n, n);
  for (int col = 0; col < n; ++col) {
    const int src = order[static_cast<std::size_t>(col)];
    out.values[static_cast<std::size_t>(col)] = a(src, src);
    int strongest = 0;
    for (int row = 1; row < n; ++row)
      if (std::abs(v(row, src)) > std::abs(v(strongest, src))) strongest = row;
    const double sign = v(strongest, src) < 0.0 ? -1.0 : 1.0;
    for (int row = 0; row < n; ++row) out.vectors(row, col) = sign * v(row, src);
  }
  return out;
}

// Smallest eigenvalue only (still a full Jacobi pass; desk scale).
inline double min_eigenvalue(const SymMatrix& m) { return sym_eigen(m).values.front(); }

// ---------------------------------------------------------------------------
// SVD of a small dense matrix (both sides <= 64) via eigendecomposition of
// the Gram matrix on the narrow side, with left factors recovered as
// A v / sigma and rank-deficient columns completed to an orthonormal set.
// ---------------------------------------------------------------------------

struct Svd {
  Matrix u;      // p x k, orthonormal columns
  Vector sigma;  // length k = min(p, q), nonnegative descending
  Matrix v;      // q x k, orthonormal columns
};

namespace detail {

// Orthonormal completion: fills columns [rank, k) of `u` so all k columns
// are orthonormal, drawing candidates from the standard basis.
inline void complete_basis(Matrix& u, int rank) {
  const int p = u.rows();
  const int k = u.cols();
  int next_candidate = 0;
  for (int col = rank; col < k; ++col) {
    while (true) {
      if (next_candidate >= p)
        throw invalid_input_error("small_svd: failed to complete orthonormal basis");
      Vector cand(static_cast<std::size_t>(p), 0.0);
      cand[static_cast<std::size_t>(next_candidate)] = 1.0;
      ++next_candidate;
      for (int j = 0; j < col; ++j) {
        double proj = 0.0;
        for (int i = 0; i < p; ++i) proj += u(i, j) * cand[static_cast<std::size_t>(i)];
        for (int i = 0; i < p; ++i) cand[static_cast<std::size_t>(i)] -= proj * u(i, j);
      }
      const double nrm = norm(cand);
      if (nrm > 0.5) {  // basis vector far enough from existing span
        for (int i = 0; i < p; ++i) u(i, col) = cand[static_cast<std::size_t>(i)] / nrm;
        break;
      }
    }
  }
}

}  // namespace detail

inline Svd small_svd(const Matrix& m) {
  if (m.rows() > 64 || m.cols() > 64)
    throw invalid_parameter_error("small_svd: supports at most 64x64");
  if (m.rows() == 0 || m.cols() == 0) throw invalid_parameter_error("small_svd: empty matrix");
  if (!m.finite()) throw invalid_input_error("small_svd: non-finite entry");

  // Work with the transpose when it is narrower, then swap factors back.
  if (m.cols() > m.rows()) {
    Svd t = small_svd(m.transposed());
    return Svd{std::move(t.v), std::move(t.sigma), std::move(t.u)};
  }

  const int p = m.rows();
  const int q = m.cols();
  const SymMatrix gram{transpose_times(m, m)};
  EigenDecomposition eig = sym_eigen(gram);  // ascending

  Svd out;
  out.sigma.resize(static_cast<std::size_t>(q));
  out.v = Matrix(q, q);
  out.u = Matrix(p, q);
  // Gram eigenvalues below ~n*eps*lambda_max are pure rounding noise; the
  // Gram route cannot resolve singular values below sqrt of that, so they
  // become exact zeros with basis-completed left factors.
  const double lambda_cutoff =
      64.0 * std::numeric_limits<double>::epsilon() * std::max(0.0, eig.values.back());
  for (int col = 0; col < q; ++col) {
    const int src = q - 1 - col;  // descending
    const double lambda = eig.values[static_cast<std::size_t>(src)];
    out.sigma[static_cast<std::size_t>(col)] =
        lambda > lambda_cutoff ? std::sqrt(lambda) : 0.0;
    for (int row = 0; row < q; ++row) out.v(row, col) = eig.vectors(row, src);
  }

  int rank = 0;
  for (int col = 0; col < q; ++col) {
    const double s = out.sigma[static_cast<std::size_t>(col)];
    if (s == 0.0) break;
    for (int row = 0; row < p; ++row) {
      double acc = 0.0;
      for (int k = 0; k < q; ++k) acc += m(row, k) * out.v(k, col);
      out.u(row, col) = acc / s;
    }
    // Re-orthonormalize against earlier columns; a collapse here means the
    // Gram route ran out of resolution, so the column is demoted to the
    // zero block instead.
    for (int prev = 0; prev < col; ++prev) {
      double proj = 0.0;
      for (int row = 0; row < p; ++row) proj += out.u(row, prev) * out.u(row, col);
      for (int row = 0; row < p; ++row) out.u(row, col) -= proj * out.u(row, prev);
    }
    double nrm = 0.0;
    for (int row = 0; row < p; ++row) nrm += out.u(row, col) * out.u(row, col);
    nrm = std::sqrt(nrm);
    if (nrm < 0.5) {
      for (int trailing = col; trailing < q; ++trailing)
        out.sigma[static_cast<std::size_t>(trailing)] = 0.0;
      break;
    }
    for (int row = 0; row < p; ++row) out.u(row, col) /= nrm;
    ++rank;
  }
  detail::complete_basis(out.u, rank);
  return out;
}

// Largest singular value. Uses the Gram matrix of the narrow side, so tall
// skinny factors (d x r with small r) stay cheap regardless of d.
inline double spectral_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  const Matrix gram = (m.cols() <= m.rows()) ? transpose_times(m, m) : times_transpose(m, m);
  const EigenDecomposition eig = sym_eigen(SymMatrix{gram});
  return std::sqrt(std::max(0.0, eig.values.back()));
}

}  // namespace pgdlab
