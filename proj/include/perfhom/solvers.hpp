// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "perfhom/assembly.hpp"
#include "perfhom/types.hpp"

namespace perfhom {

struct SolveReport {
  int iterations = 0;
  double rel_residual = 0.0;
  bool reused_factorization = false;
  double seconds = 0.0;
};

struct EigenPair {
  Complex lambda;
  Vec v;  // full-size nodal vector (zero on constrained nodes)
  double residual = 0.0;
};

struct EigenResult {
  std::vector<EigenPair> pairs;  // sorted by real part
  bool converged = true;
};

struct OpNormReport {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Reusable complex sparse LU; adjoint solves use conj(A x) = b for the
// complex-symmetric matrices produced by the assembly (A^T = A).
class Factorization {
 public:
  explicit Factorization(const SpMat& a);
  Vec solve(const Vec& rhs) const;
  Vec solve_adjoint(const Vec& rhs) const;
  Index size() const { return n_; }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  Index n_ = 0;
};

// Direct (n <= direct_limit) or Krylov solve of op.A_red x = rhs_red.
// rhs is the full-size assembled linear form; the solution is returned
// full-size with zeros on constrained nodes.
std::pair<Vec, SolveReport> solve(const DiscreteOperator& op, const Vec& rhs,
                                  double tol = 1e-10);

// Solver with a cached factorization for repeated right-hand sides.
class OperatorSolver {
 public:
  explicit OperatorSolver(const DiscreteOperator& op, double tol = 1e-10);
  std::pair<Vec, SolveReport> solve(const Vec& rhs) const;
  Vec solve_adjoint_reduced(const Vec& rhs_red) const;
  Vec solve_reduced(const Vec& rhs_red) const;
  const DiscreteOperator& op() const { return *op_; }

 private:
  const DiscreteOperator* op_;
  double tol_;
  std::shared_ptr<Factorization> fact_;
  mutable bool used_once_ = false;
};

inline constexpr Index kDirectSolveLimit = 200'000;

// All eigenvalues of A v = lambda M v with Re(lambda) in [lo, hi], up to
// k_max, by shift-invert subspace iteration with adaptive shift coverage and
// 1e-8 clustering dedup. Residuals are ||A v - lambda M v|| / ||v||.
EigenResult eigs_window(const DiscreteOperator& op, double lo, double hi,
                        int k_max, double tol = 1e-8);

// k eigenvalues nearest zero (for coercive pencils: the smallest ones),
// single shift-invert pass at sigma = 0.
EigenResult eigs_smallest(const DiscreteOperator& op, int k, double tol = 1e-8);

// Linear map between mass-weighted spaces plus its weighted adjoint.
struct LinearMap {
  Index out_dim = 0, in_dim = 0;
  std::function<Vec(const Vec&)> apply;
  std::function<Vec(const Vec&)> apply_adjoint;  // adjoint wrt the weighted products
};

// Largest singular value of the map (operator norm between the weighted
// L2 spaces) by power iteration on D^# D; deterministic per seed.
OpNormReport opnorm_diff(const LinearMap& map, const SpMat& mass_in,
                         double tol = 1e-3, std::uint64_t seed = 1,
                         int max_iter = 200);

// e^{-tB} v with B = M_red^{-1} A_red, adaptive sub-stepped Crank-Nicolson
// with dyadic step sizes (factorizations cached per step size).
class Propagator {
 public:
  explicit Propagator(const DiscreteOperator& op);
  Vec apply(double t, const Vec& v_full, double tol) const;
  Vec apply_adjoint(double t, const Vec& v_full, double tol) const;
  const DiscreteOperator& op() const { return *op_; }

 private:
  Vec propagate(double t, Vec u, double tol) const;
  const DiscreteOperator* op_;
  mutable std::map<double, std::shared_ptr<Factorization>> cache_;
};

Vec expm_apply(const DiscreteOperator& op, double t, const Vec& v,
               double tol = 1e-6);

}  // namespace perfhom
