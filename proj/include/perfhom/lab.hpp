// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "perfhom/assembly.hpp"
#include "perfhom/solvers.hpp"

namespace perfhom {

// ---- radial correctors and capacities ----

struct CorrectorSolution {
  RadialGrid grid;
  Vec values;                       // w(r) per node
  Complex flux_outer{0.0, 0.0};     // S_d r^{d-1} w'(r) at r = eps
  Complex c1{0.0, 0.0}, c2{0.0, 0.0};  // closed-form w = c1 g(r) + c2
  Complex w_at_hole{0.0, 0.0};      // w(a)
  double max_nodal_error = 0.0;     // numeric vs closed form
};

// Cellwise radial corrector on the annulus a < r < eps with w(eps) = 1 and
// the hole condition of the given kind (Dirichlet trace 0, Robin
// -w'(a) + alpha w(a) = 0 with the normal pointing into the hole, Neumann
// w == 1). The numeric path uses exact-flux (harmonic-average) conductances,
// which reproduces the closed form to rounding.
CorrectorSolution corrector_radial(const BoundaryKind& bc, double a,
                                   double eps, int d, int n_nodes = 400);

// Minimal radial Dirichlet energy of piecewise-linear u with u(1) = 1,
// u(R_trunc) = 0 in d >= 3; exceeds (d-2) S_d and converges to it.
double capacity_variational(int d, double r_trunc, const RadialGrid& grid);

// R -> infinity extrapolation through the known 1/(1 - R^{2-d}) truncation law.
double capacity_extrapolated(int d, double r_trunc, int n_nodes);

// Per-cell strange-term estimate from the corrector: Dirichlet capacity flux
// per cell volume, Robin alpha S_d a^{d-1} w(a) / (2 eps)^d, Neumann 0.
// unit_trace replaces w(a) by 1 (exact algebraic identity with mu_alpha).
Complex mu_percell(const BoundaryKind& bc, double eps, int d,
                   bool unit_trace = false, double neumann_exponent = 2.0);

// ---- sources ----

struct SourceSpec {
  std::string name = "one";  // zero | one | sin2d | gauss | cube
  double cx = 0.5, cy = 0.5, sigma = 0.1;  // gauss parameters
  int cube = 0;                            // cube index for "cube"
};

ScalarField make_source(const SourceSpec& spec);
double field_l2_norm(const Mesh& mesh, const ScalarField& f);

// ---- resolvent comparison on a companion pair ----

struct MeshPolicy {
  double h_far_factor = 0.5;  // h_far = min(factor * eps, cap)
  double h_far_cap = 0.125;
  double grading = 1.5;
  MeshOptions options;
  double h_for(double eps) const;
};

// Perforated operator A_eps (mu = 0) and limit operator A = -Lap + (1 + mu)
// assembled on a companion mesh pair, with cached factorizations and the
// discrete identification maps J (zero fill) and I (restriction).
class ResolventPair {
 public:
  ResolventPair(const PerforationSpec& spec, const MeshPolicy& policy,
                double solve_tol = 1e-10);

  const Mesh& perforated() const { return *perf_; }
  const Mesh& full() const { return *full_; }
  const MeshPair& pair() const { return pair_view_; }
  const DiscreteOperator& op_eps() const { return op_eps_; }
  const DiscreteOperator& op_limit() const { return op_lim_; }
  Complex mu() const { return op_lim_.mu; }

  Vec solve_eps(const ScalarField& f) const;    // on the perforated mesh
  Vec solve_limit(const ScalarField& f) const;  // on the full mesh
  // difference field J A_eps^{-1} I f - A^{-1} f on the full mesh
  Vec difference(const ScalarField& f) const;
  Vec difference_nodal(const Vec& f_full) const;

  double defect(const ScalarField& f) const;  // l2_defect of the two solves
  // operator-norm estimate of the composed difference map (delta_eps)
  OpNormReport delta_estimate(double tol, std::uint64_t seed) const;

  Index dofs() const { return op_eps_.n() + op_lim_.n(); }
  double extension_constant(const ScalarField& f) const;

 private:
  std::shared_ptr<const Mesh> perf_, full_;
  MeshPair pair_view_;  // meshes duplicated cheaply for plug bookkeeping
  DiscreteOperator op_eps_, op_lim_;
  std::shared_ptr<OperatorSolver> solver_eps_, solver_lim_;
  std::shared_ptr<Factorization> mass_full_lu_;
};

// ---- sweeps ----

struct ConvergenceRecord {
  double epsilon = 0.0, h_far = 0.0;
  Index dofs = 0;
  double defect = 0.0;
  double delta_eps = 0.0;  // NaN when not computed
  Complex lambda1{0.0, 0.0};
  double seconds = 0.0;
  std::string status = "ok";
};

struct SweepConfig {
  PerforationSpec base;  // epsilon overridden per entry
  std::vector<double> eps_list;
  SourceSpec source;
  MeshPolicy mesh;
  bool compute_delta = true;
  bool compute_lambda1 = false;
  double solve_tol = 1e-10;
  double delta_tol = 1e-3;
  std::uint64_t seed = 1;
  int threads = 1;
};

std::vector<ConvergenceRecord> resolvent_sweep(const SweepConfig& cfg);

// ---- weighted decay (exponential localization) ----

struct DecayCheckConfig {
  DomainSpec strip;
  double lambda = 1.0;  // > 1/2
  BoundaryKind bc;
  int cube_index = 0;   // source support in [k, k+1] x [0, 1]
  double h = 1.0 / 32.0;
  double tol_disc = 0.05;
  double big_m() const;  // M = max(2, (lambda - 1/2)^{-1})
};

struct DecayCheckReport {
  double r1 = 0.0, r2 = 0.0, big_m = 0.0;
  bool pass1 = true, pass2 = true;
  bool pass() const { return pass1 && pass2; }
};

DecayCheckReport weighted_decay_check(const DecayCheckConfig& cfg,
                                      std::uint64_t seed);

// ---- cube interactions and decomposition (unbounded-domain machinery) ----

struct InteractionResult {
  Complex inner{0.0, 0.0};  // <u_i, u_j>_{L2}
  double ratio = 0.0;       // |inner| / (norm_fi norm_fj e^{-|i-j|/2})
  double norm_fi = 0.0, norm_fj = 0.0;
};

InteractionResult interaction_decay(const ResolventPair& pair, int cube_i,
                                    int cube_j, const ScalarField& f_i,
                                    const ScalarField& f_j);

struct DecompositionReport {
  double lhs = 0.0;         // || sum u_i ||^2
  double sum_norms2 = 0.0;  // sum || u_i ||^2
  double f_norm = 0.0;      // || f ||_{L2(Omega_eps)}
  double c_min = 0.0;       // smallest admissible C
  int n_cubes = 0;
  int n = 0;
};

DecompositionReport decomposition_inequality_check(
    const ResolventPair& pair, const ScalarField& f,
    const std::vector<int>& cubes, int n);

}  // namespace perfhom
