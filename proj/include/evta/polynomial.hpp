#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <utility>
#include <vector>

#include "evta/error.hpp"

namespace evta {

/// Dense univariate real polynomial, coefficients stored lowest degree first
/// (coeffs()[j] multiplies x^j). The stored size is only a degree bound; the
/// effective degree is always derived from the numerically nonzero leading
/// coefficient.
class Polynomial {
 public:
  Polynomial() : coeffs_{0.0} {}
  explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
  }
  Polynomial(std::initializer_list<double> coeffs) : coeffs_(coeffs) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
  }

  const std::vector<double>& coeffs() const { return coeffs_; }
  int degree_bound() const { return static_cast<int>(coeffs_.size()) - 1; }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Effective degree after stripping leading coefficients below
  /// rel_tol * max|coeff|. Degree of the zero polynomial is -1.
  int effective_degree(double rel_tol = 1e-12) const {
    const double cut = rel_tol * max_abs_coeff();
    for (int j = degree_bound(); j >= 0; --j) {
      if (std::abs(coeffs_[static_cast<std::size_t>(j)]) > cut) return j;
    }
    return -1;
  }

  double operator()(double x) const {
    double v = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) v = v * x + *it;
    return v;
  }

  Polynomial derivative() const {
    if (coeffs_.size() <= 1) return Polynomial{0.0};
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t j = 1; j < coeffs_.size(); ++j) {
      d[j - 1] = static_cast<double>(j) * coeffs_[j];
    }
    return Polynomial(std::move(d));
  }

  /// p(a*x + b), expanded exactly (Horner over the affine factor).
  Polynomial compose_affine(double a, double b) const {
    std::vector<double> r{coeffs_.back()};
    for (int k = degree_bound() - 1; k >= 0; --k) {
      std::vector<double> next(r.size() + 1, 0.0);
      for (std::size_t i = 0; i < r.size(); ++i) {
        next[i] += b * r[i];
        next[i + 1] += a * r[i];
      }
      next[0] += coeffs_[static_cast<std::size_t>(k)];
      r = std::move(next);
    }
    while (r.size() > 1 && r.back() == 0.0) r.pop_back();
    return Polynomial(std::move(r));
  }

  Polynomial& operator+=(const Polynomial& other) {
    if (other.coeffs_.size() > coeffs_.size()) coeffs_.resize(other.coeffs_.size(), 0.0);
    for (std::size_t j = 0; j < other.coeffs_.size(); ++j) coeffs_[j] += other.coeffs_[j];
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }

  friend Polynomial operator*(double s, Polynomial p) {
    for (double& c : p.coeffs_) c *= s;
    return p;
  }

 private:
  std::vector<double> coeffs_;
};

struct RootOptions {
  /// A candidate eigenvalue is kept as real when |imag| <= imag_tol * (1 + r)
  /// with r the largest eigenvalue magnitude.
  double imag_tol = 1e-8;
  /// Roots closer than this are merged and reported once.
  double cluster_tol = 1e-8;
  int polish_iterations = 4;
};

namespace detail {

/// Newton refinement that never leaves the companion estimate worse off:
/// steps are accepted only while |p| decreases (at multiple roots both p and
/// p' sit at the roundoff floor and any quotient is noise).
inline void newton_polish(const Polynomial& p, const Polynomial& dp, double& x, int iters) {
  double best_x = x;
  double best_abs = std::abs(p(x));
  for (int i = 0; i < iters; ++i) {
    const double d = dp(x);
    if (std::abs(d) < 1e-300) break;
    const double step = p(x) / d;
    if (!std::isfinite(step)) break;
    const double xn = x - step;
    const double v = std::abs(p(xn));
    if (!(v < best_abs)) break;
    x = xn;
    best_x = xn;
    best_abs = v;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(x))) break;
  }
  x = best_x;
}

}  // namespace detail

/// All real roots of p inside [lo, hi] (inclusive, widened by cluster_tol),
/// deduplicated so clustered/multiple roots are reported once. Companion
/// matrix eigenvalues with Newton polish; leading/trailing coefficients below
/// 1e-12 relative are deflated.
inline std::vector<double> real_roots(const Polynomial& p, double lo, double hi,
                                      const RootOptions& opt = {}) {
  if (!(lo < hi)) throw Error(Errc::out_of_range, "real_roots requires lo < hi");
  const int deg = p.effective_degree();
  if (deg < 0) throw Error(Errc::zero_polynomial, "all coefficients are ~0");
  if (deg == 0) return {};

  std::vector<double> c(p.coeffs().begin(), p.coeffs().begin() + deg + 1);

  // Trailing deflation: factor out x^k, remembering the root at zero.
  const double cut = 1e-12 * p.max_abs_coeff();
  bool root_at_zero = false;
  while (c.size() > 1 && std::abs(c.front()) <= cut) {
    c.erase(c.begin());
    root_at_zero = true;
  }

  std::vector<double> roots;
  if (root_at_zero) roots.push_back(0.0);

  const int n = static_cast<int>(c.size()) - 1;
  if (n >= 1) {
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) companion(i, n - 1) = -c[static_cast<std::size_t>(i)] / c.back();
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) {
      throw Error(Errc::io_failure, "eigenvalue iteration failed in real_roots");
    }
    const auto vals = es.eigenvalues();
    double max_mag = 0.0;
    for (int i = 0; i < vals.size(); ++i) max_mag = std::max(max_mag, std::abs(vals[i]));
    const double imag_cut = opt.imag_tol * (1.0 + max_mag);

    const Polynomial pc{std::vector<double>(c)};
    const Polynomial dpc = pc.derivative();
    for (int i = 0; i < vals.size(); ++i) {
      if (std::abs(vals[i].imag()) > imag_cut) continue;
      double x = vals[i].real();
      detail::newton_polish(pc, dpc, x, opt.polish_iterations);
      roots.push_back(x);
    }
  }

  std::sort(roots.begin(), roots.end());
  std::vector<double> merged;
  std::size_t i = 0;
  while (i < roots.size()) {
    std::size_t j = i + 1;
    double sum = roots[i];
    while (j < roots.size() && roots[j] - roots[j - 1] <= opt.cluster_tol) {
      sum += roots[j];
      ++j;
    }
    merged.push_back(sum / static_cast<double>(j - i));
    i = j;
  }

  std::vector<double> in_range;
  for (double r : merged) {
    if (r >= lo - opt.cluster_tol && r <= hi + opt.cluster_tol) in_range.push_back(r);
  }
  return in_range;
}

struct MonotoneReport {
  bool monotone_nondecreasing = false;
  double min_derivative = 0.0;
  double arg_min = 0.0;
};

/// Exact monotonicity check of p on [lo, hi]: locates the interior extrema of
/// p' through the real roots of p'' and takes the minimum of p' over those
/// points plus the endpoints. Monotone iff min >= -check_tol_rel * max|p'|.
inline MonotoneReport exact_monotone_check(const Polynomial& p, double lo, double hi,
                                           double check_tol_rel = 1e-9) {
  if (!(lo < hi)) throw Error(Errc::out_of_range, "exact_monotone_check requires lo < hi");
  const Polynomial dp = p.derivative();
  const Polynomial ddp = dp.derivative();

  std::vector<double> candidates{lo, hi};
  if (ddp.effective_degree() >= 1) {
    for (double r : real_roots(ddp, lo, hi)) candidates.push_back(r);
  }

  MonotoneReport rep;
  rep.min_derivative = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (double x : candidates) {
    const double xc = std::clamp(x, lo, hi);
    const double d = dp(xc);
    max_abs = std::max(max_abs, std::abs(d));
    if (d < rep.min_derivative) {
      rep.min_derivative = d;
      rep.arg_min = xc;
    }
  }
  rep.monotone_nondecreasing = rep.min_derivative >= -check_tol_rel * std::max(1.0, max_abs);
  return rep;
}

struct CubicMonotonicity {
  bool holds = false;
  double margin = 0.0;  // 3ac - b^2
};

/// Analytic global-monotonicity test for a cubic a*x^3 + b*x^2 + c*x + d:
/// increasing on all of R iff a > 0, c > 0 and b^2 < 3ac. Note this is the
/// global condition; monotonicity on [0, inf) alone is weaker (a cubic can
/// fail b^2 < 3ac yet have p' >= 0 for all x >= 0).
inline CubicMonotonicity cubic_monotone_conditions(const Polynomial& p) {
  if (p.effective_degree() != 3) {
    throw Error(Errc::wrong_degree, "cubic_monotone_conditions requires an effective degree-3 polynomial");
  }
  const auto& q = p.coeffs();
  const double a = q[3], b = q[2], c = q[1];
  CubicMonotonicity res;
  res.margin = 3.0 * a * c - b * b;
  res.holds = a > 0.0 && c > 0.0 && res.margin > 0.0;
  return res;
}

}  // namespace evta
