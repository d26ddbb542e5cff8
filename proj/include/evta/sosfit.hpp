#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "evta/conic.hpp"
#include "evta/error.hpp"
#include "evta/polynomial.hpp"

namespace evta {

/// Samples (x >= 0, y) for a one-dimensional least-squares fit. Duplicate x
/// values are kept (they weight the objective); validation only requires at
/// least two distinct abscissae.
struct FitDataset {
  std::vector<std::pair<double, double>> samples;

  static FitDataset from_samples(std::vector<std::pair<double, double>> samples) {
    FitDataset d{std::move(samples)};
    d.validate();
    return d;
  }

  void validate() const {
    if (samples.size() < 2) throw Error(Errc::degenerate_data, "need at least 2 samples");
    std::vector<double> xs;
    xs.reserve(samples.size());
    for (const auto& [x, y] : samples) {
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw Error(Errc::degenerate_data, "non-finite sample");
      }
      if (x < 0.0) throw Error(Errc::degenerate_data, "torque samples must be nonnegative");
      xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    const double span = std::max(1.0, xs.back());
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (xs[i] - xs[i - 1] > 1e-12 * span) ++distinct;
    }
    if (distinct < 2) throw Error(Errc::degenerate_data, "fewer than 2 distinct x values");
  }

  double x_max() const {
    double m = 0.0;
    for (const auto& [x, y] : samples) m = std::max(m, x);
    return m;
  }

  double y_abs_max() const {
    double m = 0.0;
    for (const auto& [x, y] : samples) m = std::max(m, std::abs(y));
    return m;
  }

  double y_median() const {
    std::vector<double> ys;
    ys.reserve(samples.size());
    for (const auto& [x, y] : samples) ys.push_back(y);
    std::sort(ys.begin(), ys.end());
    const std::size_t n = ys.size();
    return n % 2 == 1 ? ys[n / 2] : 0.5 * (ys[n / 2 - 1] + ys[n / 2]);
  }
};

inline constexpr int kMaxFitDegree = 12;

struct GramBlock {
  enum class Role { t_block, s_block };
  Role role;
  int dim = 0;
  Eigen::MatrixXd entries;
};

/// The assembled SOS program for one constrained fit, in normalized
/// coordinates (x/x_scale in [0,1], y/y_scale in [-1,1]). Decision vector
/// z = [c_0..c_deg | packed T | packed S]; the T block certifies t(x) - eps
/// and S certifies s(x) in the decomposition p'(x) = eps + t_hat(x) + x s(x),
/// which pins p' >= eps on [0, inf). For degree 1 the S block is structurally
/// zero (the x^1 matching row pins its only entry) and is presolved away.
struct SosProgram {
  int degree = 0;
  double epsilon = 0.0;        // original units, W per N*m
  double pos_tol = 0.0;        // original units, W
  double x_scale = 1.0;
  double y_scale = 1.0;
  double epsilon_scaled = 0.0;
  double pos_tol_scaled = 0.0;
  int num_equalities = 0;
  conic::PsdBlock t_block;
  conic::PsdBlock s_block;   // dim recorded even when pinned
  bool s_pinned = false;
  conic::Program core;
  Eigen::VectorXd interior_start;

  int decision_dim() const { return core.num_vars; }
};

struct FitOptions {
  double epsilon = 1e-3;  // derivative positivity margin, W per N*m
  /// p(0) >= pos_tol; NaN selects the default 1e-6 * median(y).
  double pos_tol = std::numeric_limits<double>::quiet_NaN();
  conic::Options solver;
  double check_tol_rel = 1e-9;
};

struct FitReport {
  Polynomial polynomial;  // original units
  double rmse = 0.0;      // W
  conic::Status solver_status = conic::Status::optimal;
  double min_derivative_on_range = 0.0;  // W per N*m over [0, max x]
  bool constrained = false;
  double epsilon = 0.0;
  double x_scale = 1.0;
  double y_scale = 1.0;
  double rel_gap = 0.0;
  std::vector<std::string> warnings;
};

namespace sosdetail {

inline void check_degree(int degree) {
  if (degree < 1) throw Error(Errc::wrong_degree, "fit degree must be >= 1");
  if (degree > kMaxFitDegree) {
    throw Error(Errc::degree_cap,
                "fit degree " + std::to_string(degree) + " exceeds the supported maximum of " +
                    std::to_string(kMaxFitDegree) + " (higher orders are numerically fragile)");
  }
}

inline Eigen::MatrixXd vandermonde(const FitDataset& data, int degree, double x_scale) {
  const int n = static_cast<int>(data.samples.size());
  Eigen::MatrixXd V(n, degree + 1);
  for (int i = 0; i < n; ++i) {
    const double x = data.samples[static_cast<std::size_t>(i)].first / x_scale;
    double p = 1.0;
    for (int j = 0; j <= degree; ++j) {
      V(i, j) = p;
      p *= x;
    }
  }
  return V;
}

inline double rmse_of(const Polynomial& p, const FitDataset& data) {
  double ss = 0.0;
  for (const auto& [x, y] : data.samples) {
    const double r = y - p(x);
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(data.samples.size()));
}

/// De-scale normalized coefficients: p(x) = y_scale * p_norm(x / x_scale).
inline Polynomial descale(const Eigen::VectorXd& c_norm, double x_scale, double y_scale) {
  std::vector<double> c(static_cast<std::size_t>(c_norm.size()));
  double xpow = 1.0;
  for (Eigen::Index j = 0; j < c_norm.size(); ++j) {
    c[static_cast<std::size_t>(j)] = c_norm[j] * y_scale / xpow;
    xpow *= x_scale;
  }
  return Polynomial(std::move(c));
}

}  // namespace sosdetail

/// Ordinary least-squares polynomial fit (QR on the normalized Vandermonde).
inline FitReport fit_unconstrained(const FitDataset& data, int degree) {
  sosdetail::check_degree(degree);
  data.validate();
  FitReport rep;
  if (static_cast<int>(data.samples.size()) < degree + 1) {
    rep.warnings.push_back("fewer samples than coefficients; fit is interpolatory");
  }
  const double x_scale = std::max(data.x_max(), 1e-30);
  const double y_scale = std::max(data.y_abs_max(), 1e-30);
  const Eigen::MatrixXd V = sosdetail::vandermonde(data, degree, x_scale);
  Eigen::VectorXd y(V.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] = data.samples[static_cast<std::size_t>(i)].second / y_scale;
  }
  const Eigen::VectorXd c = V.colPivHouseholderQr().solve(y);
  rep.polynomial = sosdetail::descale(c, x_scale, y_scale);
  rep.rmse = sosdetail::rmse_of(rep.polynomial, data);
  rep.constrained = false;
  rep.x_scale = x_scale;
  rep.y_scale = y_scale;
  rep.solver_status = conic::Status::optimal;
  rep.min_derivative_on_range =
      exact_monotone_check(rep.polynomial, 0.0, std::max(x_scale, 1e-12)).min_derivative;
  return rep;
}

/// Assemble the constrained-fit SOS program. Gram dimensions follow the
/// degree rules for nonnegativity of p' on [0, inf): with q = p' of even
/// degree 2k, deg t <= 2k (dim k+1) and deg s <= 2k-2 (dim k); of odd degree
/// 2k+1, both dims are k+1. Equality rows match the coefficients of
/// p'(x) - eps - t_hat(x) - x*s(x) to zero, one row per power of x.
inline SosProgram build_sos_program(const FitDataset& data, int degree, const FitOptions& opt = {}) {
  sosdetail::check_degree(degree);
  data.validate();
  if (opt.epsilon < 0.0) throw Error(Errc::out_of_range, "epsilon must be >= 0");

  SosProgram prog;
  prog.degree = degree;
  prog.epsilon = opt.epsilon;
  prog.pos_tol = std::isnan(opt.pos_tol) ? 1e-6 * std::abs(data.y_median()) : opt.pos_tol;
  prog.x_scale = std::max(data.x_max(), 1e-30);
  prog.y_scale = std::max(data.y_abs_max(), 1e-30);
  prog.epsilon_scaled = opt.epsilon * prog.x_scale / prog.y_scale;
  prog.pos_tol_scaled = prog.pos_tol / prog.y_scale;

  const int q_deg = degree - 1;  // degree of p'
  int t_dim = 0, s_dim = 0;
  if (degree == 1) {
    t_dim = 1;
    s_dim = 1;
    prog.s_pinned = true;
  } else if (q_deg % 2 == 0) {
    const int k = q_deg / 2;
    t_dim = k + 1;
    s_dim = k;
  } else {
    const int k = (q_deg - 1) / 2;
    t_dim = k + 1;
    s_dim = k + 1;
  }

  const int nc = degree + 1;
  prog.t_block = {nc, t_dim};
  const int t_packed = prog.t_block.packed_size();
  prog.s_block = {nc + t_packed, s_dim};
  const int s_packed = prog.s_pinned ? 0 : prog.s_block.packed_size();

  conic::Program& core = prog.core;
  core.num_vars = nc + t_packed + s_packed;
  core.psd.push_back(prog.t_block);
  if (!prog.s_pinned) core.psd.push_back(prog.s_block);
  core.bounds.push_back({0, prog.pos_tol_scaled});

  // Least-squares objective in normalized coordinates.
  const Eigen::MatrixXd V = sosdetail::vandermonde(data, degree, prog.x_scale);
  Eigen::VectorXd y(V.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] = data.samples[static_cast<std::size_t>(i)].second / prog.y_scale;
  }
  core.P = Eigen::MatrixXd::Zero(core.num_vars, core.num_vars);
  core.P.topLeftCorner(nc, nc) = 2.0 * V.transpose() * V;
  // Tiny Tikhonov term: keeps the Newton systems solvable at degree > 10
  // (monomial normal matrices are near-singular) and selects the min-norm
  // coefficient vector when the data underdetermines the fit. The induced
  // bias is ~1e-10 relative, far below every reported tolerance.
  const double tikhonov = 1e-10 * core.P.topLeftCorner(nc, nc).trace() / nc;
  core.P.topLeftCorner(nc, nc) += tikhonov * Eigen::MatrixXd::Identity(nc, nc);
  core.q = Eigen::VectorXd::Zero(core.num_vars);
  core.q.head(nc) = -2.0 * V.transpose() * y;

  // Coefficient matching. For degree 1 the x^1 row would pin the single S
  // entry to zero, so that block is dropped from the variables and only the
  // x^0 row remains.
  prog.num_equalities = degree == 1 ? 1 : q_deg + 1;
  core.A = Eigen::MatrixXd::Zero(prog.num_equalities, core.num_vars);
  core.b = Eigen::VectorXd::Zero(prog.num_equalities);
  for (int j = 0; j < prog.num_equalities; ++j) {
    core.A(j, j + 1) = static_cast<double>(j + 1);  // coefficient of x^j in p'
    for (int a = 0; a < t_dim; ++a) {
      const int b2 = j - a;
      if (b2 < 0 || b2 >= t_dim || b2 > a) continue;
      const double w = (a == b2) ? 1.0 : 2.0;
      core.A(j, prog.t_block.offset + conic::detail::packed_index(a, b2, t_dim)) = -w;
    }
    if (!prog.s_pinned) {
      for (int a = 0; a < s_dim; ++a) {
        const int b2 = (j - 1) - a;
        if (b2 < 0 || b2 >= s_dim || b2 > a) continue;
        const double w = (a == b2) ? 1.0 : 2.0;
        core.A(j, prog.s_block.offset + conic::detail::packed_index(a, b2, s_dim)) = -w;
      }
    }
    core.b[j] = (j == 0) ? prog.epsilon_scaled : 0.0;
  }

  // Strictly feasible start: identity Gram blocks determine p' through the
  // matching rows; the intercept sits above its bound.
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(core.num_vars);
  conic::detail::pack(Eigen::MatrixXd::Identity(t_dim, t_dim), prog.t_block, z0);
  if (!prog.s_pinned) {
    conic::detail::pack(Eigen::MatrixXd::Identity(s_dim, s_dim), prog.s_block, z0);
  }
  for (int j = 0; j < prog.num_equalities; ++j) {
    double rhs = core.b[j];
    for (int v = nc; v < core.num_vars; ++v) rhs -= core.A(j, v) * z0[v];
    z0[j + 1] = rhs / core.A(j, j + 1);
  }
  z0[0] = prog.pos_tol_scaled + 0.5;
  prog.interior_start = std::move(z0);
  return prog;
}

/// Thin adapter between program construction and the conic backend.
inline conic::Solution solve_conic(const SosProgram& prog, const conic::Options& opt = {}) {
  return conic::solve(prog.core, opt, &prog.interior_start);
}

/// Fitted polynomial in original units from a solver point.
inline Polynomial polynomial_from(const SosProgram& prog, const Eigen::VectorXd& z) {
  return sosdetail::descale(z.head(prog.degree + 1), prog.x_scale, prog.y_scale);
}

/// Gram blocks of the solved program (normalized coordinates). The S block of
/// a degree-1 program is the pinned 1x1 zero matrix.
inline std::vector<GramBlock> gram_blocks_from(const SosProgram& prog, const Eigen::VectorXd& z) {
  std::vector<GramBlock> blocks;
  blocks.push_back({GramBlock::Role::t_block, prog.t_block.dim,
                    conic::detail::unpack(z, prog.t_block)});
  if (prog.s_pinned) {
    blocks.push_back({GramBlock::Role::s_block, 1, Eigen::MatrixXd::Zero(1, 1)});
  } else {
    blocks.push_back({GramBlock::Role::s_block, prog.s_block.dim,
                      conic::detail::unpack(z, prog.s_block)});
  }
  return blocks;
}

/// Witness polynomials (normalized coordinates) with t including the epsilon
/// shift, so that p'(x) = t(x) + x*s(x) holds identically.
struct SosWitnesses {
  Polynomial t;
  Polynomial s;
};

inline SosWitnesses witnesses_from(const SosProgram& prog, const Eigen::VectorXd& z) {
  auto gram_poly = [](const Eigen::MatrixXd& Q) {
    std::vector<double> c(static_cast<std::size_t>(2 * Q.rows() - 1), 0.0);
    for (int a = 0; a < Q.rows(); ++a) {
      for (int b = 0; b < Q.cols(); ++b) c[static_cast<std::size_t>(a + b)] += Q(a, b);
    }
    return Polynomial(std::move(c));
  };
  const auto blocks = gram_blocks_from(prog, z);
  SosWitnesses w;
  w.t = gram_poly(blocks[0].entries) + Polynomial{prog.epsilon_scaled};
  w.s = gram_poly(blocks[1].entries);
  return w;
}

/// Pseudoconvex (positive, monotonically increasing on [0, inf)) polynomial
/// fit: build_sos_program composed with solve_conic.
inline FitReport fit_pseudoconvex(const FitDataset& data, int degree, const FitOptions& opt = {}) {
  SosProgram prog = build_sos_program(data, degree, opt);
  FitReport rep;
  if (static_cast<int>(data.samples.size()) < degree + 1) {
    rep.warnings.push_back("fewer samples than coefficients; fit is interpolatory");
  }
  conic::Solution sol = solve_conic(prog, opt.solver);
  rep.solver_status = sol.status;
  rep.constrained = true;
  rep.epsilon = prog.epsilon;
  rep.x_scale = prog.x_scale;
  rep.y_scale = prog.y_scale;
  rep.rel_gap = sol.rel_gap;
  if (sol.status == conic::Status::optimal || sol.status == conic::Status::near_optimal) {
    rep.polynomial = polynomial_from(prog, sol.z);
    rep.rmse = sosdetail::rmse_of(rep.polynomial, data);
    rep.min_derivative_on_range =
        exact_monotone_check(rep.polynomial, 0.0, prog.x_scale, opt.check_tol_rel).min_derivative;
  }
  return rep;
}

/// Is the (even-degree) polynomial a sum of squares over all of R?
/// Solved as max lambda s.t. Gram(q) - lambda*I is PSD on the Gram affine
/// subspace; q is SOS iff lambda* >= 0. The margin is reported in the units
/// of the (internally normalized) polynomial.
struct SosFeasibility {
  bool feasible = false;
  double lambda_star = 0.0;
  conic::Status status = conic::Status::optimal;
};

inline SosFeasibility sos_feasibility_on_line(const Polynomial& q_in,
                                              const conic::Options& opt_in = {}) {
  const int deg = q_in.effective_degree();
  if (deg < 0) return {true, 0.0, conic::Status::optimal};  // zero polynomial
  if (deg % 2 != 0) return {false, 0.0, conic::Status::optimal};  // odd degree, never SOS
  const double scale = q_in.max_abs_coeff();
  std::vector<double> qc(q_in.coeffs().begin(), q_in.coeffs().begin() + deg + 1);
  for (double& c : qc) c /= scale;

  const int dim = deg / 2 + 1;
  conic::Program core;
  const conic::PsdBlock m_block{1, dim};
  core.num_vars = 1 + m_block.packed_size();  // [lambda | packed M]
  core.P = Eigen::MatrixXd::Zero(core.num_vars, core.num_vars);
  core.q = Eigen::VectorXd::Zero(core.num_vars);
  core.q[0] = -1.0;  // maximize lambda
  core.psd.push_back(m_block);
  core.A = Eigen::MatrixXd::Zero(deg + 1, core.num_vars);
  core.b = Eigen::VectorXd::Zero(deg + 1);
  for (int j = 0; j <= deg; ++j) {
    for (int a = 0; a < dim; ++a) {
      const int b2 = j - a;
      if (b2 < 0 || b2 >= dim || b2 > a) continue;
      const double w = (a == b2) ? 1.0 : 2.0;
      core.A(j, m_block.offset + conic::detail::packed_index(a, b2, dim)) = w;
    }
    if (j % 2 == 0) core.A(j, 0) = 1.0;  // Q = M + lambda*I on the diagonal
    core.b[j] = qc[static_cast<std::size_t>(j)];
  }

  // Interior start from an explicit Gram completion of q.
  Eigen::MatrixXd Q0 = Eigen::MatrixXd::Zero(dim, dim);
  for (int j = 0; j <= deg; ++j) {
    if (j % 2 == 0) {
      Q0(j / 2, j / 2) += qc[static_cast<std::size_t>(j)];
    } else {
      Q0((j + 1) / 2, (j - 1) / 2) += 0.5 * qc[static_cast<std::size_t>(j)];
      Q0((j - 1) / 2, (j + 1) / 2) += 0.5 * qc[static_cast<std::size_t>(j)];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q0, Eigen::EigenvaluesOnly);
  const double lam0 = es.eigenvalues().minCoeff() - 1.0;
  Eigen::VectorXd z0(core.num_vars);
  z0[0] = lam0;
  Eigen::MatrixXd M0 = Q0 - lam0 * Eigen::MatrixXd::Identity(dim, dim);
  conic::detail::pack(M0, m_block, z0);

  conic::Options opt = opt_in;
  opt.gap_tol = std::min(opt.gap_tol, 1e-10);
  conic::Solution sol = conic::solve(core, opt, &z0);
  SosFeasibility out;
  out.status = sol.status;
  out.lambda_star = sol.z[0] * scale;
  out.feasible = sol.z[0] >= -1e-8;
  return out;
}

}  // namespace evta
