#pragma once

// Verified objective instances: symmetric low-rank matrix factorization
// with its landscape constants, quartically-confined quadratic saddles, and
// strongly convex quadratic bowls.

#include <memory>
#include <utility>

#include "json.hpp"
#include "pgdlab/errors.hpp"
#include "pgdlab/linalg.hpp"
#include "pgdlab/objective.hpp"
#include "pgdlab/pgd.hpp"

namespace pgdlab {

// ---------------------------------------------------------------------------
// Symmetric low-rank matrix factorization:
//   f(U) = 1/2 || U U^T - M* ||_F^2,  U in R^{d x r},  M* PSD of rank r.
//
// The optimizer sees U flattened column-major: x[i + j*d] = U(i, j).
// ---------------------------------------------------------------------------

class MatrixFactorizationProblem {
 public:
  // Deterministic instance M* = V diag(spectrum) V^T with V an orthonormal
  // frame built from seeded Gaussians. The spectrum lists the r positive
  // eigenvalues (any order; stored descending).
  static MatrixFactorizationProblem random(int d, int r, Vector spectrum, std::uint64_t seed) {
    if (d < 1 || r < 1 || r > d)
      throw invalid_parameter_error("mf: need 1 <= r <= d");
    if (static_cast<int>(spectrum.size()) != r)
      throw invalid_parameter_error("mf: spectrum length must equal rank");
    std::sort(spectrum.begin(), spectrum.end(), std::greater<double>());
    if (spectrum.back() <= 0.0)
      throw invalid_parameter_error("mf: spectrum must be strictly positive");

    RngState rng(seed);
    Matrix frame(d, r);
    for (int j = 0; j < r; ++j) {
      Vector col(static_cast<std::size_t>(d));
      double nrm = 0.0;
      while (true) {
        for (double& x : col) x = rng.next_gaussian();
        // Modified Gram-Schmidt against previous columns.
        for (int prev = 0; prev < j; ++prev) {
          double proj = 0.0;
          for (int i = 0; i < d; ++i) proj += frame(i, prev) * col[static_cast<std::size_t>(i)];
          for (int i = 0; i < d; ++i) col[static_cast<std::size_t>(i)] -= proj * frame(i, prev);
        }
        nrm = norm(col);
        if (nrm > 1e-8) break;
      }
      for (int i = 0; i < d; ++i) frame(i, j) = col[static_cast<std::size_t>(i)] / nrm;
    }

    MatrixFactorizationProblem p;
    p.dim_ = d;
    p.rank_ = r;
    p.spectrum_ = spectrum;
    p.seed_ = seed;
    p.has_generation_spec_ = true;
    p.v_star_ = frame;
    for (int j = 0; j < r; ++j) {
      const double scale = std::sqrt(spectrum[static_cast<std::size_t>(j)]);
      for (int i = 0; i < d; ++i) p.v_star_(i, j) *= scale;
    }
    p.m_star_ = SymMatrix{times_transpose(p.v_star_, p.v_star_)};
    p.cache_v_star_columns();
    p.sigma1_ = spectrum.front();
    p.sigmar_ = spectrum.back();
    p.gamma_bound_ = 36.0 * p.sigma1_;
    return p;
  }

  // From an explicit PSD matrix of exact rank r; the reference factor comes
  // from the top-r eigenpairs.
  static MatrixFactorizationProblem from_matrix(const SymMatrix& m_star, int r) {
    const int d = m_star.dim();
    if (r < 1 || r > d) throw invalid_parameter_error("mf: need 1 <= r <= d");
    const EigenDecomposition eig = sym_eigen(m_star);  // ascending
    const double sigma1 = eig.values.back();
    if (sigma1 <= 0.0) throw invalid_input_error("mf: matrix has no positive spectrum");
    if (eig.values.front() < -1e-10 * sigma1)
      throw invalid_input_error("mf: matrix is not PSD");
    if (d > r && std::abs(eig.values[static_cast<std::size_t>(d - r - 1)]) > 1e-10 * sigma1)
      throw invalid_input_error("mf: matrix rank exceeds the declared rank");
    const double sigmar = eig.values[static_cast<std::size_t>(d - r)];
    if (sigmar <= 0.0) throw invalid_input_error("mf: matrix rank below the declared rank");

    MatrixFactorizationProblem p;
    p.dim_ = d;
    p.rank_ = r;
    p.m_star_ = m_star;
    p.sigma1_ = sigma1;
    p.sigmar_ = sigmar;
    p.spectrum_.resize(static_cast<std::size_t>(r));
    p.v_star_ = Matrix(d, r);
    for (int j = 0; j < r; ++j) {
      const int src = d - 1 - j;  // descending
      p.spectrum_[static_cast<std::size_t>(j)] = eig.values[static_cast<std::size_t>(src)];
      const double scale = std::sqrt(eig.values[static_cast<std::size_t>(src)]);
      for (int i = 0; i < d; ++i) p.v_star_(i, j) = scale * eig.vectors(i, src);
    }
    p.cache_v_star_columns();
    p.gamma_bound_ = 36.0 * p.sigma1_;
    return p;
  }

  int dim() const { return dim_; }
  int rank() const { return rank_; }
  double sigma1() const { return sigma1_; }
  double sigmar() const { return sigmar_; }
  const SymMatrix& m_star() const { return m_star_; }
  const Matrix& v_star() const { return v_star_; }
  const Vector& spectrum() const { return spectrum_; }

  double gamma_bound() const { return gamma_bound_; }
  void set_gamma_bound(double gamma) {
    if (gamma < sigma1_)
      throw invalid_parameter_error("mf: gamma bound must be at least sigma1");
    gamma_bound_ = gamma;
  }

  // f(U) = 1/2 ||U U^T - M*||_F^2
  double value(const Matrix& u) const {
    check_shape(u);
    const Matrix e = times_transpose(u, u) - m_star_.as_matrix();
    return 0.5 * frobenius_dot(e, e);
  }

  // grad f(U) = 2 (U U^T - M*) U
  Matrix gradient(const Matrix& u) const {
    check_shape(u);
    const Matrix e = times_transpose(u, u) - m_star_.as_matrix();
    return scaled(e * u, 2.0);
  }

  // Quadratic form of the Hessian:
  //   ||U Z^T + Z U^T||_F^2 + 2 <U U^T - M*, Z Z^T>.
  double hessian_quadform(const Matrix& u, const Matrix& z) const {
    check_shape(u);
    check_shape(z);
    const Matrix uzt = times_transpose(u, z);
    Matrix sym = uzt;
    for (int i = 0; i < sym.rows(); ++i)
      for (int j = 0; j < sym.cols(); ++j) sym(i, j) += uzt(j, i);
    const Matrix e = times_transpose(u, u) - m_star_.as_matrix();
    return frobenius_dot(sym, sym) + 2.0 * frobenius_dot(e, times_transpose(z, z));
  }

  // Directional Hessian: 2[(U U^T - M*) Z + (U Z^T + Z U^T) U].
  Matrix hessian_apply(const Matrix& u, const Matrix& z) const {
    check_shape(u);
    check_shape(z);
    const Matrix e = times_transpose(u, u) - m_star_.as_matrix();
    const Matrix uzt = times_transpose(u, z);
    Matrix sym = uzt;
    for (int i = 0; i < sym.rows(); ++i)
      for (int j = 0; j < sym.cols(); ++j) sym(i, j) += uzt(j, i);
    Matrix out = e * z + sym * u;
    for (double& x : out.data()) x *= 2.0;
    return out;
  }

  struct Alignment {
    double distance = 0.0;
    Matrix aligned;  // V* R with the optimal orthogonal R
  };

  // min over orthogonal R of ||U - V* R||_F; the optimal R is A B^T where
  // A D B^T is the SVD of V*^T U.
  Alignment distance_to_solutions(const Matrix& u) const {
    check_shape(u);
    const Svd svd = small_svd(transpose_times(v_star_, u));
    const Matrix rotation = times_transpose(svd.u, svd.v);
    Alignment out;
    out.aligned = v_star_ * rotation;
    out.distance = frobenius_norm(u - out.aligned);
    return out;
  }

  struct Constants {
    SmoothnessProfile smoothness;
    StrictSaddleParams saddle;
    RegularityParams regularity;
  };

  // Landscape constants valid inside {U : ||U||^2 < gamma_bound}:
  // 8*Gamma smoothness, 12*sqrt(Gamma) Hessian Lipschitz, the
  // (sigma_r^{3/2}/24, sigma_r/3, sqrt(sigma_r)/3) strict-saddle triple and
  // (2 sigma_r / 3, 10 sigma_1) regularity near the solution set.
  Constants constants() const {
    Constants c;
    c.smoothness.ell = 8.0 * gamma_bound_;
    c.smoothness.rho = 12.0 * std::sqrt(gamma_bound_);
    c.saddle.theta = std::pow(sigmar_, 1.5) / 24.0;
    c.saddle.gamma = sigmar_ / 3.0;
    c.saddle.zeta = std::sqrt(sigmar_) / 3.0;
    c.regularity.alpha = 2.0 * sigmar_ / 3.0;
    c.regularity.beta = 10.0 * sigma1_;
    c.regularity.zeta = c.saddle.zeta;
    return c;
  }

  struct MfRunParams {
    PgdParams pgd;
    double gamma_bound = 0.0;  // (2 max{||U0||, 3 sqrt(sigma1)})^2
    double beta = 0.0;         // 10 sigma1
    double epsilon = 0.0;      // sigma_r^2 / (108 sqrt(Gamma))
    double delta_f = 0.0;      // r Gamma^2 / 2
  };

  // Full argument tuple for the two-phase runner started at U0.
  MfRunParams derive_run_params(const Matrix& u0, double c, double delta) const {
    check_shape(u0);
    MfRunParams tp;
    const double gamma_sqrt = 2.0 * std::max(spectral_norm(u0), 3.0 * std::sqrt(sigma1_));
    tp.gamma_bound = gamma_sqrt * gamma_sqrt;
    tp.beta = 10.0 * sigma1_;
    tp.epsilon = sigmar_ * sigmar_ / (108.0 * gamma_sqrt);
    tp.delta_f = rank_ * tp.gamma_bound * tp.gamma_bound / 2.0;
    tp.pgd = compute_pgd_params(8.0 * tp.gamma_bound, 12.0 * gamma_sqrt, tp.epsilon, c, delta,
                                tp.delta_f, dim_ * rank_);
    return tp;
  }

  Vector flatten(const Matrix& u) const {
    check_shape(u);
    Vector x(static_cast<std::size_t>(dim_) * rank_);
    for (int j = 0; j < rank_; ++j)
      for (int i = 0; i < dim_; ++i) x[static_cast<std::size_t>(i + j * dim_)] = u(i, j);
    return x;
  }

  Matrix unflatten(const Vector& x) const {
    if (static_cast<int>(x.size()) != dim_ * rank_)
      throw invalid_parameter_error("mf: flattened length mismatch");
    Matrix u(dim_, rank_);
    for (int j = 0; j < rank_; ++j)
      for (int i = 0; i < dim_; ++i) u(i, j) = x[static_cast<std::size_t>(i + j * dim_)];
    return u;
  }

  // Objective over the flattened factor. The fused path keeps the residual
  // in thread-local scratch so descent loops do not allocate.
  ObjectiveFunction objective() const {
    auto p = std::make_shared<const MatrixFactorizationProblem>(*this);
    const Constants c = constants();
    const int d = dim_;
    const int r = rank_;

    ObjectiveFunction f;
    f.dim = d * r;
    f.profile = c.smoothness;
    f.saddle = c.saddle;
    f.regularity = c.regularity;
    f.domain_radius = std::sqrt(gamma_bound_);
    f.value = [p](const Vector& x) { return p->value(p->unflatten(x)); };
    f.gradient = [p](const Vector& x) { return p->flatten(p->gradient(p->unflatten(x))); };
    f.hessian_vec = [p](const Vector& x, const Vector& z) {
      return p->flatten(p->hessian_apply(p->unflatten(x), p->unflatten(z)));
    };
    f.distance_to_solutions = [p](const Vector& x) {
      return p->distance_to_solutions(p->unflatten(x)).distance;
    };
    // M* = V* V*^T exactly, so with C = U^T U and P = V*^T U:
    //   f = (||C||_F^2 - 2 ||P||_F^2 + tr(M*^2)) / 2,
    //   grad = 2 (U C - V* P).
    // Everything stays in d x r and r x r blocks; no d x d product.
    const double m_star_sq = frobenius_dot(m_star_.as_matrix(), m_star_.as_matrix());
    f.value_and_gradient = [p, d, r, m_star_sq](const Vector& x, Vector& grad) -> double {
      thread_local std::vector<double> scratch;
      scratch.resize(2 * static_cast<std::size_t>(r) * r);
      double* c = scratch.data();      // U^T U
      double* pr = c + r * r;          // V*^T U

      const double* vsc = p->v_star_cols_.data();  // column-major copy of V*
      for (int a = 0; a < r; ++a) {
        const double* ua = x.data() + static_cast<std::size_t>(a) * d;
        for (int b = a; b < r; ++b) {
          const double* ub = x.data() + static_cast<std::size_t>(b) * d;
          const double acc = dot(ua, ub, static_cast<std::size_t>(d));
          c[a * r + b] = acc;
          c[b * r + a] = acc;
        }
      }
      for (int a = 0; a < r; ++a) {
        const double* va = vsc + static_cast<std::size_t>(a) * d;
        for (int b = 0; b < r; ++b) {
          const double* ub = x.data() + static_cast<std::size_t>(b) * d;
          pr[a * r + b] = dot(va, ub, static_cast<std::size_t>(d));
        }
      }

      double c_sq = 0.0, p_sq = 0.0;
      for (int i = 0; i < r * r; ++i) {
        c_sq += c[i] * c[i];
        p_sq += pr[i] * pr[i];
      }

      grad.resize(x.size());
      for (int j = 0; j < r; ++j) {
        double* gj = grad.data() + static_cast<std::size_t>(j) * d;
        for (int i = 0; i < d; ++i) gj[i] = 0.0;
        for (int a = 0; a < r; ++a) {
          const double caj = 2.0 * c[a * r + j];
          const double paj = 2.0 * pr[a * r + j];
          const double* ua = x.data() + static_cast<std::size_t>(a) * d;
          const double* va = vsc + static_cast<std::size_t>(a) * d;
          for (int i = 0; i < d; ++i) gj[i] += caj * ua[i] - paj * va[i];
        }
      }
      return 0.5 * (c_sq - 2.0 * p_sq + m_star_sq);
    };
    return f;
  }

  // {d, r, spectrum, seed}; only instances built by random() carry one.
  nlohmann::json to_json() const {
    if (!has_generation_spec_)
      throw config_error("mf: instance was not built from a generation spec");
    return nlohmann::json{{"d", dim_}, {"r", rank_}, {"spectrum", spectrum_}, {"seed", seed_}};
  }

  static MatrixFactorizationProblem from_json(const nlohmann::json& j) {
    return random(j.at("d").get<int>(), j.at("r").get<int>(), j.at("spectrum").get<Vector>(),
                  j.at("seed").get<std::uint64_t>());
  }

 private:
  MatrixFactorizationProblem() = default;

  void check_shape(const Matrix& u) const {
    if (u.rows() != dim_ || u.cols() != rank_)
      throw invalid_parameter_error("mf: factor shape mismatch");
    if (!u.finite()) throw invalid_input_error("mf: non-finite factor");
  }

  void cache_v_star_columns() {
    v_star_cols_.resize(static_cast<std::size_t>(dim_) * rank_);
    for (int j = 0; j < rank_; ++j)
      for (int i = 0; i < dim_; ++i)
        v_star_cols_[static_cast<std::size_t>(i + j * dim_)] = v_star_(i, j);
  }

  int dim_ = 0;
  int rank_ = 0;
  SymMatrix m_star_;
  Matrix v_star_;
  std::vector<double> v_star_cols_;  // column-major mirror for hot loops
  Vector spectrum_;
  double sigma1_ = 0.0;
  double sigmar_ = 0.0;
  double gamma_bound_ = 0.0;
  std::uint64_t seed_ = 0;
  bool has_generation_spec_ = false;
};

// ---------------------------------------------------------------------------
// Quadratic saddle with quartic confinement:
//   f(x) = 1/2 x^T H x + (q/4) ||x||^4,  lambda_min(H) < 0.
//
// Inside ||x|| <= R the declared constants are ell = ||H|| + 3 q R^2 and
// rho = 6 q R; a pure quadratic (q = 0) has a constant Hessian, for which
// any positive Hessian-Lipschitz constant is valid, so rho defaults to 1.
// ---------------------------------------------------------------------------

class QuadraticSaddle {
 public:
  QuadraticSaddle(SymMatrix h, double quartic_coeff,
                  double domain_radius = std::numeric_limits<double>::infinity())
      : h_(std::move(h)), quartic_(quartic_coeff), domain_radius_(domain_radius) {
    if (quartic_ < 0.0) throw invalid_parameter_error("QuadraticSaddle: quartic_coeff < 0");
    if (quartic_ > 0.0 && !std::isfinite(domain_radius_))
      throw invalid_parameter_error(
          "QuadraticSaddle: quartic term needs a finite domain radius for its constants");
    const EigenDecomposition eig = sym_eigen(h_);
    if (eig.values.front() >= 0.0)
      throw invalid_input_error("QuadraticSaddle: H needs a negative eigenvalue");
    min_eig_ = eig.values.front();
    spectral_ = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
  }

  // Confinement with the default coefficient ||H|| / (2 R^2); keeps the
  // function bounded below while the constants stay moderate.
  static QuadraticSaddle confined(SymMatrix h, double domain_radius) {
    const EigenDecomposition eig = sym_eigen(h);
    const double spectral = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
    return QuadraticSaddle(std::move(h), 0.5 * spectral / (domain_radius * domain_radius),
                           domain_radius);
  }

  const SymMatrix& hessian_at_origin() const { return h_; }
  double quartic_coeff() const { return quartic_; }
  double min_eigenvalue() const { return min_eig_; }

  ObjectiveFunction objective() const {
    auto h = std::make_shared<const SymMatrix>(h_);
    const double q = quartic_;
    ObjectiveFunction f;
    f.dim = h_.dim();
    f.profile.ell =
        spectral_ + (q > 0.0 ? 3.0 * q * domain_radius_ * domain_radius_ : 0.0);
    f.profile.rho = q > 0.0 ? 6.0 * q * domain_radius_ : 1.0;
    f.domain_radius = domain_radius_;
    f.value = [h, q](const Vector& x) {
      const double ns = norm_sq(x);
      return 0.5 * dot(x, h->multiply(x)) + 0.25 * q * ns * ns;
    };
    f.gradient = [h, q](const Vector& x) {
      Vector g = h->multiply(x);
      if (q > 0.0) axpy(q * norm_sq(x), x, g);
      return g;
    };
    f.hessian_vec = [h, q](const Vector& x, const Vector& v) {
      Vector out = h->multiply(v);
      if (q > 0.0) {
        axpy(q * norm_sq(x), v, out);
        axpy(2.0 * q * dot(x, v), x, out);
      }
      return out;
    };
    f.value_and_gradient = [h, q](const Vector& x, Vector& grad) {
      grad = h->multiply(x);
      const double quad = 0.5 * dot(x, grad);
      const double ns = norm_sq(x);
      if (q > 0.0) axpy(q * ns, x, grad);
      return quad + 0.25 * q * ns * ns;
    };
    return f;
  }

 private:
  SymMatrix h_;
  double quartic_ = 0.0;
  double domain_radius_ = 0.0;
  double min_eig_ = 0.0;
  double spectral_ = 0.0;
};

// ---------------------------------------------------------------------------
// Strongly convex quadratic bowl 1/2 (x - t)^T A (x - t); used as the
// benign end of the test suite.
// ---------------------------------------------------------------------------

inline ObjectiveFunction quadratic_bowl_problem(const SymMatrix& a, Vector target) {
  const EigenDecomposition eig = sym_eigen(a);
  if (eig.values.front() <= 0.0)
    throw invalid_input_error("quadratic_bowl_problem: matrix must be positive definite");
  auto mat = std::make_shared<const SymMatrix>(a);
  auto t = std::make_shared<const Vector>(std::move(target));

  ObjectiveFunction f;
  f.dim = a.dim();
  f.profile.ell = eig.values.back();
  f.profile.rho = 1.0;  // constant Hessian
  f.regularity = RegularityParams{eig.values.front(), eig.values.back(),
                                  std::numeric_limits<double>::infinity()};
  f.value = [mat, t](const Vector& x) {
    const Vector d = sub(x, *t);
    return 0.5 * dot(d, mat->multiply(d));
  };
  f.gradient = [mat, t](const Vector& x) { return mat->multiply(sub(x, *t)); };
  f.hessian_vec = [mat](const Vector&, const Vector& v) { return mat->multiply(v); };
  f.value_and_gradient = [mat, t](const Vector& x, Vector& grad) {
    const Vector d = sub(x, *t);
    grad = mat->multiply(d);
    return 0.5 * dot(d, grad);
  };
  f.distance_to_solutions = [t](const Vector& x) { return distance(x, *t); };
  return f;
}

// ---------------------------------------------------------------------------
// Trace inequality for symmetric PSD pairs:
//   sigma_min(A) tr(B) <= tr(A B) <= ||A|| tr(B).
// ---------------------------------------------------------------------------

struct TraceProductBounds {
  double lower = 0.0;
  double value = 0.0;
  double upper = 0.0;
};

inline TraceProductBounds trace_product_bounds(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw invalid_parameter_error("trace_product_bounds: dim mismatch");
  const EigenDecomposition ea = sym_eigen(a);
  const EigenDecomposition eb = sym_eigen(b);
  const double scale_a = std::max(std::abs(ea.values.back()), 1.0);
  const double scale_b = std::max(std::abs(eb.values.back()), 1.0);
  if (ea.values.front() < -tolerances::psd_check * scale_a)
    throw invalid_input_error("trace_product_bounds: first argument is not PSD");
  if (eb.values.front() < -tolerances::psd_check * scale_b)
    throw invalid_input_error("trace_product_bounds: second argument is not PSD");

  TraceProductBounds out;
  out.value = trace(a.as_matrix() * b.as_matrix());
  out.lower = ea.values.front() * b.trace();
  out.upper = ea.values.back() * b.trace();
  const double slack = 1e-10 * (1.0 + std::abs(out.value));
  if (out.value < out.lower - slack || out.value > out.upper + slack)
    throw invalid_input_error("trace_product_bounds: sandwich violated beyond tolerance");
  return out;
}

}  // namespace pgdlab
