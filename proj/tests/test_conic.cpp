#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "evta/conic.hpp"

namespace conic = evta::conic;

namespace {

/// min (z0 - 3)^2 s.t. z0 >= 5  ->  z0 = 5.
conic::Program bound_projection() {
  conic::Program p;
  p.num_vars = 1;
  p.P = Eigen::MatrixXd::Constant(1, 1, 2.0);
  p.q = Eigen::VectorXd::Constant(1, -6.0);
  p.A = Eigen::MatrixXd::Zero(0, 1);
  p.b = Eigen::VectorXd::Zero(0);
  p.bounds.push_back({0, 5.0});
  return p;
}

}  // namespace

TEST_CASE("quadratic with active bound projects onto the boundary") {
  auto prog = bound_projection();
  Eigen::VectorXd start = Eigen::VectorXd::Constant(1, 6.0);
  auto sol = conic::solve(prog, {}, &start);
  REQUIRE(sol.status == conic::Status::optimal);
  CHECK(sol.z[0] == Catch::Approx(5.0).margin(1e-7));
}

TEST_CASE("equality-constrained quadratic (no cones) solves in one centering") {
  // min (z0-1)^2 + (z1-2)^2 s.t. z0 + z1 = 1  ->  z = (0, 1).
  conic::Program p;
  p.num_vars = 2;
  p.P = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.q = Eigen::VectorXd(2);
  p.q << -2.0, -4.0;
  p.A = Eigen::MatrixXd::Ones(1, 2);
  p.b = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd start(2);
  start << 0.5, 0.5;
  auto sol = conic::solve(p, {}, &start);
  REQUIRE(sol.status == conic::Status::optimal);
  CHECK(sol.z[0] == Catch::Approx(0.0).margin(1e-9));
  CHECK(sol.z[1] == Catch::Approx(1.0).margin(1e-9));
  CHECK(sol.eq_residual <= 1e-10);
}

TEST_CASE("smallest eigenvalue via max lambda with M = Q - lambda I") {
  // Q = [[2, 1], [1, 2]] has eigenvalues {1, 3}; maximize lambda with
  // Q - lambda I PSD  ->  lambda* = 1.
  conic::Program p;
  conic::PsdBlock blk{1, 2};
  p.num_vars = 1 + blk.packed_size();
  p.P = Eigen::MatrixXd::Zero(p.num_vars, p.num_vars);
  p.q = Eigen::VectorXd::Zero(p.num_vars);
  p.q[0] = -1.0;
  p.psd.push_back(blk);
  p.A = Eigen::MatrixXd::Zero(3, p.num_vars);
  p.b = Eigen::VectorXd(3);
  // M00 + lambda = 2; M10 = 1; M11 + lambda = 2
  p.A(0, 1) = 1.0; p.A(0, 0) = 1.0; p.b[0] = 2.0;
  p.A(1, 2) = 1.0;                  p.b[1] = 1.0;
  p.A(2, 3) = 1.0; p.A(2, 0) = 1.0; p.b[2] = 2.0;

  Eigen::VectorXd start(p.num_vars);
  start << -2.0, 4.0, 1.0, 4.0;  // lambda=-2, M=Q+2I is PD
  auto sol = conic::solve(p, {}, &start);
  REQUIRE(sol.status == conic::Status::optimal);
  CHECK(sol.z[0] == Catch::Approx(1.0).margin(1e-8));
  CHECK(sol.min_block_eig >= -1e-9);
}

TEST_CASE("phase I finds an interior point without a supplied start") {
  auto prog = bound_projection();
  auto sol = conic::solve(prog);  // LS point for empty A is 0, infeasible vs bound 5
  REQUIRE(sol.status == conic::Status::optimal);
  CHECK(sol.z[0] == Catch::Approx(5.0).margin(1e-7));
}

TEST_CASE("phase I certifies infeasibility") {
  // z0 >= 1 and z0 = 0 cannot both hold.
  conic::Program p;
  p.num_vars = 1;
  p.P = Eigen::MatrixXd::Zero(1, 1);
  p.q = Eigen::VectorXd::Zero(1);
  p.A = Eigen::MatrixXd::Ones(1, 1);
  p.b = Eigen::VectorXd::Zero(1);
  p.bounds.push_back({0, 1.0});
  auto sol = conic::solve(p);
  CHECK(sol.status == conic::Status::infeasible);
}

TEST_CASE("PSD feasibility of a pinned negative matrix is infeasible") {
  // 1x1 block equal to -1 can never be PSD.
  conic::Program p;
  conic::PsdBlock blk{0, 1};
  p.num_vars = 1;
  p.P = Eigen::MatrixXd::Zero(1, 1);
  p.q = Eigen::VectorXd::Zero(1);
  p.A = Eigen::MatrixXd::Ones(1, 1);
  p.b = Eigen::VectorXd::Constant(1, -1.0);
  p.psd.push_back(blk);
  auto sol = conic::solve(p);
  CHECK(sol.status == conic::Status::infeasible);
}

TEST_CASE("accuracy: interior optimum is recovered to tight tolerance") {
  // min (z0-2)^2 + (z1+1)^2, z as a diagonal 2x2 PSD block (z0, z01, z1)
  // with the PSD constraint inactive at the optimum... the optimum z1 = -1
  // violates PSD, so the solve must project: expect z1 -> 0 boundary.
  conic::Program p;
  conic::PsdBlock blk{0, 2};
  p.num_vars = blk.packed_size();
  p.P = Eigen::MatrixXd::Zero(3, 3);
  p.P(0, 0) = 2.0;
  p.P(2, 2) = 2.0;
  p.q = Eigen::VectorXd::Zero(3);
  p.q[0] = -4.0;
  p.q[2] = 2.0;
  p.A = Eigen::MatrixXd::Zero(0, 3);
  p.b = Eigen::VectorXd::Zero(0);
  p.psd.push_back(blk);
  Eigen::VectorXd start(3);
  start << 1.0, 0.0, 1.0;
  auto sol = conic::solve(p, {}, &start);
  REQUIRE(sol.status == conic::Status::optimal);
  CHECK(sol.z[0] == Catch::Approx(2.0).margin(1e-7));
  CHECK(std::abs(sol.z[1]) <= 1e-6);
  CHECK(std::abs(sol.z[2]) <= 1e-6);
  CHECK(sol.min_block_eig >= -1e-9);
}
