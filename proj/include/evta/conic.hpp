#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace evta::conic {

enum class Status { optimal, near_optimal, infeasible, numerical_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "OPTIMAL";
    case Status::near_optimal: return "NEAR_OPTIMAL";
    case Status::infeasible: return "INFEASIBLE";
    case Status::numerical_failure: return "NUMERICAL_FAILURE";
  }
  return "UNKNOWN";
}

/// Symmetric PSD block of dimension dim, stored in z as the packed lower
/// triangle, column-major: (0,0),(1,0),...,(dim-1,0),(1,1),... Entries are
/// the matrix entries themselves (no sqrt(2) scaling).
struct PsdBlock {
  int offset = 0;
  int dim = 0;
  int packed_size() const { return dim * (dim + 1) / 2; }
};

/// Scalar bound z[index] >= lower.
struct Bound {
  int index = 0;
  double lower = 0.0;
};

/// minimize 1/2 z'Pz + q'z  s.t.  Az = b,  PSD blocks, scalar lower bounds.
/// Variables not covered by a block or bound are free.
struct Program {
  int num_vars = 0;
  Eigen::MatrixXd P;  // n x n symmetric PSD (may be zero)
  Eigen::VectorXd q;
  Eigen::MatrixXd A;  // m x n
  Eigen::VectorXd b;
  std::vector<PsdBlock> psd;
  std::vector<Bound> bounds;

  double barrier_parameter() const {
    double nu = static_cast<double>(bounds.size());
    for (const auto& blk : psd) nu += blk.dim;
    return nu;
  }

  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(P * z) + q.dot(z); }
};

struct Options {
  double feas_tol = 1e-8;
  double gap_tol = 1e-9;  // relative duality gap target
  double t_initial = 1.0;
  double t_growth = 30.0;
  int max_outer = 120;
  int max_newton = 80;
  double newton_tol = 1e-11;  // on Newton decrement^2 / 2
  /// Early exit once the objective drops below this (used by phase I).
  double stop_below = -std::numeric_limits<double>::infinity();
};

struct Solution {
  Status status = Status::numerical_failure;
  Eigen::VectorXd z;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double rel_gap = std::numeric_limits<double>::infinity();
  double min_block_eig = 0.0;
  double eq_residual = 0.0;
  int newton_iterations = 0;
  std::string message;
};

namespace detail {

inline int packed_index(int i, int j, int dim) {
  // i >= j, column-major packed lower triangle
  return j * dim - j * (j - 1) / 2 + (i - j);
}

inline Eigen::MatrixXd unpack(const Eigen::VectorXd& z, const PsdBlock& blk) {
  Eigen::MatrixXd M(blk.dim, blk.dim);
  for (int j = 0; j < blk.dim; ++j) {
    for (int i = j; i < blk.dim; ++i) {
      const double v = z[blk.offset + packed_index(i, j, blk.dim)];
      M(i, j) = v;
      M(j, i) = v;
    }
  }
  return M;
}

inline void pack(const Eigen::MatrixXd& M, const PsdBlock& blk, Eigen::VectorXd& z) {
  for (int j = 0; j < blk.dim; ++j) {
    for (int i = j; i < blk.dim; ++i) {
      z[blk.offset + packed_index(i, j, blk.dim)] = M(i, j);
    }
  }
}

/// -sum log det(blocks) - sum log(z_i - lower); +inf outside the interior.
inline double barrier_value(const Program& prog, const Eigen::VectorXd& z) {
  double phi = 0.0;
  for (const auto& blk : prog.psd) {
    Eigen::LLT<Eigen::MatrixXd> llt(unpack(z, blk));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    for (int i = 0; i < blk.dim; ++i) {
      const double d = llt.matrixL()(i, i);
      if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
      phi -= 2.0 * std::log(d);
    }
  }
  for (const auto& bnd : prog.bounds) {
    const double s = z[bnd.index] - bnd.lower;
    if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    phi -= std::log(s);
  }
  return phi;
}

/// Gradient and Hessian of the barrier in packed coordinates. For a packed
/// entry a=(i,j) with weight w_a (1 on the diagonal, 2 off it), X = M^{-1}:
///   grad_a = -w_a * X_ij
///   hess_ab = (w_a * w_b / 2) * (X_ik X_jl + X_il X_jk),  b=(k,l)
inline bool barrier_derivatives(const Program& prog, const Eigen::VectorXd& z,
                                Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  const int n = prog.num_vars;
  grad.setZero(n);
  hess.setZero(n, n);
  for (const auto& blk : prog.psd) {
    Eigen::LLT<Eigen::MatrixXd> llt(unpack(z, blk));
    if (llt.info() != Eigen::Success) return false;
    const Eigen::MatrixXd X = llt.solve(Eigen::MatrixXd::Identity(blk.dim, blk.dim));
    for (int j = 0; j < blk.dim; ++j) {
      for (int i = j; i < blk.dim; ++i) {
        const int a = blk.offset + packed_index(i, j, blk.dim);
        const double wa = (i == j) ? 1.0 : 2.0;
        grad[a] += -wa * X(i, j);
        for (int l = 0; l < blk.dim; ++l) {
          for (int k = l; k < blk.dim; ++k) {
            const int bb = blk.offset + packed_index(k, l, blk.dim);
            const double wb = (k == l) ? 1.0 : 2.0;
            hess(a, bb) += 0.5 * wa * wb * (X(i, k) * X(j, l) + X(i, l) * X(j, k));
          }
        }
      }
    }
  }
  for (const auto& bnd : prog.bounds) {
    const double s = z[bnd.index] - bnd.lower;
    if (!(s > 0.0)) return false;
    grad[bnd.index] += -1.0 / s;
    hess(bnd.index, bnd.index) += 1.0 / (s * s);
  }
  return true;
}

inline double min_block_eigenvalue(const Program& prog, const Eigen::VectorXd& z) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& blk : prog.psd) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(unpack(z, blk), Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues().minCoeff());
  }
  for (const auto& bnd : prog.bounds) m = std::min(m, z[bnd.index] - bnd.lower);
  return m;  // +inf when the program has no conic part
}

struct CenterResult {
  bool converged = false;
  bool stalled = false;
  int iterations = 0;
};

/// Equilibrated dense solve of K x = rhs with one round of iterative
/// refinement. The KKT systems here mix barrier-Hessian entries ~1/slack^2
/// with O(1) constraint rows, so a raw LU rank test rejects them; scaling
/// plus a residual check is the reliable acceptance criterion.
inline bool solve_linear(const Eigen::MatrixXd& K, const Eigen::VectorXd& rhs,
                         Eigen::VectorXd& x) {
  const Eigen::Index n = K.rows();
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = K.row(i).cwiseAbs().maxCoeff();
    d[i] = r > 0.0 ? 1.0 / std::sqrt(r) : 1.0;
  }
  const Eigen::MatrixXd Ks = d.asDiagonal() * K * d.asDiagonal();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Ks);
  lu.setThreshold(1e-15);
  if (!lu.isInvertible()) return false;
  x = d.asDiagonal() * lu.solve(d.asDiagonal() * rhs);
  double best_resid = (rhs - K * x).cwiseAbs().maxCoeff();
  Eigen::VectorXd best_x = x;
  for (int refine = 0; refine < 5; ++refine) {
    const Eigen::VectorXd r = rhs - K * x;
    x += d.asDiagonal() * lu.solve(d.asDiagonal() * r);
    const double resid = (rhs - K * x).cwiseAbs().maxCoeff();
    if (resid < best_resid) {
      best_resid = resid;
      best_x = x;
    } else {
      break;
    }
  }
  x = best_x;
  // Best-effort direction: quality is judged by the caller through the
  // Newton decrement and the line search, so only outright breakdown fails.
  return x.allFinite();
}

/// Damped Newton centering of t*f0(z) + phi(z) over Az = b from a strictly
/// feasible start.
inline CenterResult center(const Program& prog, double t, Eigen::VectorXd& z,
                           const Options& opt) {
  CenterResult res;
  const int n = prog.num_vars;
  const int m = static_cast<int>(prog.A.rows());
  Eigen::VectorXd grad_phi(n);
  Eigen::MatrixXd hess_phi(n, n);
  double best_decrement = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int it = 0; it < opt.max_newton; ++it) {
    if (!barrier_derivatives(prog, z, grad_phi, hess_phi)) {
      res.stalled = true;
      return res;
    }
    const Eigen::VectorXd g = t * (prog.P * z + prog.q) + grad_phi;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = t * prog.P + hess_phi;
    Eigen::VectorXd rhs(n + m);
    rhs.head(n) = -g;
    if (m > 0) {
      kkt.topRightCorner(n, m) = prog.A.transpose();
      kkt.bottomLeftCorner(m, n) = prog.A;
      rhs.tail(m) = -(prog.A * z - prog.b);  // keeps roundoff drift corrected
    }
    Eigen::VectorXd step;
    if (!solve_linear(kkt, rhs, step)) {
      res.stalled = true;
      return res;
    }
    const Eigen::VectorXd dz = step.head(n);
    const double decrement_sq = -g.dot(dz);
    if (!(decrement_sq > 0.0)) {
      // With a PD Hessian the decrement is nonnegative in exact arithmetic;
      // after at least one accepted step a negative value means the Newton
      // metric hit its roundoff floor. On entry it means a broken direction.
      res.converged = it > 0;
      res.stalled = !res.converged;
      return res;
    }
    ++res.iterations;
    if (decrement_sq / 2.0 <= opt.newton_tol) {
      res.converged = true;
      return res;
    }
    // Once approximately centered, further steps that fail to shrink the
    // decrement are solving at the roundoff floor of the KKT system; the
    // path-following gap bound only needs approximate centering.
    if (decrement_sq < 0.5 * best_decrement) {
      best_decrement = decrement_sq;
      since_best = 0;
    } else if (decrement_sq / 2.0 <= 1e-2 && ++since_best >= 3) {
      res.converged = true;
      return res;
    }

    // Backtracking on the *change* of t*f0 + phi; the objective change is
    // evaluated analytically to avoid cancellation against t*f0 at large t.
    const double phi0 = barrier_value(prog, z);
    const double gP_d = (prog.P * z + prog.q).dot(dz);
    const double dPd = dz.dot(prog.P * dz);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 64; ++ls) {
      const Eigen::VectorXd zn = z + alpha * dz;
      const double dpsi =
          t * (alpha * gP_d + 0.5 * alpha * alpha * dPd) + (barrier_value(prog, zn) - phi0);
      if (std::isfinite(dpsi) && dpsi <= -0.25 * alpha * decrement_sq) {
        z = zn;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.converged = decrement_sq / 2.0 <= 1e4 * opt.newton_tol;
      res.stalled = !res.converged;
      return res;
    }
    if (prog.objective(z) < opt.stop_below) {
      // Early-exit target reached (phase I); the subproblem may be unbounded
      // below in this regime, so do not insist on full centering.
      res.converged = true;
      return res;
    }
  }
  res.stalled = true;
  return res;
}

}  // namespace detail

/// Barrier path-following from a strictly feasible start.
inline Solution solve_from_interior(const Program& prog, Eigen::VectorXd z, const Options& opt) {
  Solution sol;
  const double nu = std::max(prog.barrier_parameter(), 1.0);
  double t = opt.t_initial;
  double t_centered = opt.t_initial;
  int total_newton = 0;
  bool stalled = false;
  bool early = false;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    auto cr = detail::center(prog, t, z, opt);
    total_newton += cr.iterations;
    if (cr.stalled) {
      stalled = true;
      break;
    }
    t_centered = t;
    const double obj = prog.objective(z);
    if (obj < opt.stop_below) {
      early = true;
      break;
    }
    if ((nu / t) / (1.0 + std::abs(obj)) <= opt.gap_tol) break;
    if (t > 1e17) break;
    t *= opt.t_growth;
  }
  sol.z = std::move(z);
  sol.objective = prog.objective(sol.z);
  sol.rel_gap = (nu / t_centered) / (1.0 + std::abs(sol.objective));
  sol.min_block_eig = detail::min_block_eigenvalue(prog, sol.z);
  sol.eq_residual = prog.A.rows() > 0 ? (prog.A * sol.z - prog.b).cwiseAbs().maxCoeff() : 0.0;
  sol.newton_iterations = total_newton;
  if (early || sol.rel_gap <= opt.gap_tol) {
    sol.status = Status::optimal;
  } else if (sol.rel_gap <= 1e4 * opt.gap_tol) {
    sol.status = Status::near_optimal;
    sol.message = stalled ? "newton stalled before reaching target gap" : "gap target not reached";
  } else {
    sol.status = Status::numerical_failure;
    sol.message = "centering failed far from target gap";
  }
  return sol;
}

/// Phase I: look for a strictly feasible point of prog by minimizing the
/// uniform cone shift s (blocks M + sI, bounds z_i + s >= lower), with shadow
/// variables carrying the shifted quantities. Returns nullopt if the system
/// is infeasible or the search fails; *fail_status then tells which.
inline std::optional<Eigen::VectorXd> find_interior(const Program& prog, const Options& opt,
                                                    Status* fail_status = nullptr) {
  auto fail = [&](Status st) {
    if (fail_status) *fail_status = st;
    return std::nullopt;
  };
  const int n = prog.num_vars;
  Eigen::VectorXd z0;
  if (prog.A.rows() > 0) {
    z0 = prog.A.completeOrthogonalDecomposition().solve(prog.b);
    const double resid = (prog.A * z0 - prog.b).cwiseAbs().maxCoeff();
    const double scale = 1.0 + prog.b.cwiseAbs().maxCoeff();
    if (resid > 1e-8 * scale) return fail(Status::infeasible);  // inconsistent equalities
  } else {
    z0 = Eigen::VectorXd::Zero(n);
  }
  if (detail::min_block_eigenvalue(prog, z0) > 1e-6) return std::optional<Eigen::VectorXd>(z0);

  // Layout: [z (n) | s (1) | shadow packed blocks | shadow bound slacks].
  int aux_n = n + 1;
  std::vector<PsdBlock> shadow_blocks;
  for (const auto& blk : prog.psd) {
    shadow_blocks.push_back({aux_n, blk.dim});
    aux_n += blk.packed_size();
  }
  const int bound_shadow0 = aux_n;
  aux_n += static_cast<int>(prog.bounds.size());

  Program aux;
  aux.num_vars = aux_n;
  aux.P = Eigen::MatrixXd::Zero(aux_n, aux_n);
  aux.q = Eigen::VectorXd::Zero(aux_n);
  aux.q[n] = 1.0;  // minimize s
  aux.psd = shadow_blocks;
  for (std::size_t i = 0; i < prog.bounds.size(); ++i) {
    aux.bounds.push_back({bound_shadow0 + static_cast<int>(i), prog.bounds[i].lower});
  }
  aux.bounds.push_back({n, -1.0});  // s >= -1 keeps phase I bounded

  int rows = static_cast<int>(prog.A.rows());
  for (const auto& blk : prog.psd) rows += blk.packed_size();
  rows += static_cast<int>(prog.bounds.size());
  aux.A = Eigen::MatrixXd::Zero(rows, aux_n);
  aux.b = Eigen::VectorXd::Zero(rows);
  aux.A.topLeftCorner(prog.A.rows(), n) = prog.A;
  aux.b.head(prog.A.rows()) = prog.b;
  int r = static_cast<int>(prog.A.rows());
  for (std::size_t k = 0; k < prog.psd.size(); ++k) {
    const auto& blk = prog.psd[k];
    const auto& shadow = shadow_blocks[k];
    for (int j = 0; j < blk.dim; ++j) {
      for (int i = j; i < blk.dim; ++i) {
        const int p = detail::packed_index(i, j, blk.dim);
        aux.A(r, shadow.offset + p) = 1.0;
        aux.A(r, blk.offset + p) = -1.0;
        if (i == j) aux.A(r, n) = -1.0;  // shadow = original + s on the diagonal
        ++r;
      }
    }
  }
  for (std::size_t i = 0; i < prog.bounds.size(); ++i) {
    aux.A(r, bound_shadow0 + static_cast<int>(i)) = 1.0;
    aux.A(r, prog.bounds[i].index) = -1.0;
    aux.A(r, n) = -1.0;  // shadow = original + s
    ++r;
  }

  // Strictly feasible start for the auxiliary program.
  double worst = detail::min_block_eigenvalue(prog, z0);
  const double s0 = std::max(1.0, -worst + 1.0);
  Eigen::VectorXd za = Eigen::VectorXd::Zero(aux_n);
  za.head(n) = z0;
  za[n] = s0;
  for (std::size_t k = 0; k < prog.psd.size(); ++k) {
    Eigen::MatrixXd M = detail::unpack(z0, prog.psd[k]);
    M.diagonal().array() += s0;
    detail::pack(M, shadow_blocks[k], za);
  }
  for (std::size_t i = 0; i < prog.bounds.size(); ++i) {
    za[bound_shadow0 + static_cast<int>(i)] = z0[prog.bounds[i].index] + s0;
  }

  Options phase1 = opt;
  phase1.gap_tol = 1e-9;
  phase1.stop_below = -1e-4;  // any certified s < 0 proves strict feasibility
  Solution sol = solve_from_interior(aux, std::move(za), phase1);
  const double s_star = sol.z[n];
  if (s_star < -1e-8) {
    Eigen::VectorXd z = sol.z.head(n);
    if (detail::min_block_eigenvalue(prog, z) > 0.0) return std::optional<Eigen::VectorXd>(z);
  }
  // s* minus the duality gap lower-bounds the deepest possible shift; if that
  // stays positive the original cone system has no interior point.
  const double gap_abs = sol.rel_gap * (1.0 + std::abs(sol.objective));
  if ((sol.status == Status::optimal || sol.status == Status::near_optimal) &&
      s_star - gap_abs > opt.feas_tol) {
    return fail(Status::infeasible);
  }
  return fail(Status::numerical_failure);
}

/// Front door: solve with an optional caller-supplied strictly feasible start.
inline Solution solve(const Program& prog, const Options& opt = {},
                      const Eigen::VectorXd* interior_start = nullptr) {
  Eigen::VectorXd z;
  if (interior_start != nullptr && detail::min_block_eigenvalue(prog, *interior_start) > 0.0) {
    z = *interior_start;
  } else {
    Status why = Status::numerical_failure;
    auto found = find_interior(prog, opt, &why);
    if (!found) {
      Solution sol;
      sol.status = why;
      sol.message = why == Status::infeasible ? "no feasible point (phase I certificate)"
                                              : "phase I failed to find an interior point";
      sol.z = Eigen::VectorXd::Zero(prog.num_vars);
      return sol;
    }
    z = std::move(*found);
  }
  return solve_from_interior(prog, std::move(z), opt);
}

}  // namespace evta::conic
