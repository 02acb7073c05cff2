// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include "perfhom/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>

#include "perfhom/rng.hpp"

namespace perfhom {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wall_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// int_{r0}^{r1} s^{1-d} ds, the resistance of one radial element
double resist_integral(double r0, double r1, int d) {
  return (d == 2) ? std::log(r1 / r0) : (1.0 / r0 - 1.0 / r1);
}

double radial_g(double r, int d) { return (d == 2) ? std::log(r) : -1.0 / r; }
double radial_gprime(double r, int d) {
  return (d == 2) ? 1.0 / r : 1.0 / (r * r);
}

}  // namespace

CorrectorSolution corrector_radial(const BoundaryKind& bc, double a, double eps,
                                   int d, int n_nodes) {
  bc.validate();
  if (!(a > 0.0 && a < eps))
    throw_error(Error::Code::Argument, "corrector requires 0 < a < eps");
  if (d != 2 && d != 3)
    throw_error(Error::Code::Argument, "corrector requires d in {2, 3}");
  if (n_nodes < 2) throw_error(Error::Code::Argument, "need at least 2 nodes");

  CorrectorSolution sol;
  sol.grid = radial_grid(a, eps, n_nodes - 1, true);
  const RealVec& r = sol.grid.nodes;
  const Index n = r.size();
  sol.values.resize(n);
  const double sd = surface_area_unit_ball(d);

  // closed forms: w = c1 g(r) + c2
  switch (bc.kind) {
    case BcKind::Neumann:
      sol.c1 = 0.0;
      sol.c2 = 1.0;
      break;
    case BcKind::Dirichlet: {
      const double span = radial_g(eps, d) - radial_g(a, d);
      sol.c1 = Complex(1.0 / span, 0.0);
      sol.c2 = Complex(-radial_g(a, d) / span, 0.0);
      break;
    }
    case BcKind::Robin: {
      const Complex alpha = bc.alpha;
      const double span = radial_g(eps, d) - radial_g(a, d);
      const Complex den = radial_gprime(a, d) + alpha * span;
      if (std::abs(den) == 0.0)
        throw_error(Error::Code::Numerical, "degenerate Robin corrector system");
      sol.c1 = alpha / den;
      sol.c2 = Complex(1.0, 0.0) - sol.c1 * radial_g(eps, d);
      break;
    }
  }
  auto closed = [&](double rr) { return sol.c1 * radial_g(rr, d) + sol.c2; };
  sol.w_at_hole = closed(a);
  // S_d r^{d-1} w' is r-independent and equals S_d c1 (g' r^{d-1} = 1)
  sol.flux_outer = sd * sol.c1;

  // numeric chain with exact-flux conductances (nodally exact for this ODE):
  // r^{d-1} w' = current, w_{k+1} - w_k = current * resist(r_k, r_{k+1})
  Complex current, w0;
  const double g_total = resist_integral(a, eps, d);
  switch (bc.kind) {
    case BcKind::Neumann:
      current = 0.0;
      w0 = 1.0;
      break;
    case BcKind::Dirichlet:
      current = Complex(1.0 / g_total, 0.0);
      w0 = 0.0;
      break;
    case BcKind::Robin: {
      const Complex alpha = bc.alpha;
      const Complex denom =
          Complex(1.0, 0.0) + alpha * std::pow(a, d - 1) * g_total;
      w0 = Complex(1.0, 0.0) / denom;
      current = alpha * std::pow(a, d - 1) * w0;
      break;
    }
  }
  sol.values[0] = w0;
  for (Index k = 0; k + 1 < n; ++k)
    sol.values[k + 1] =
        sol.values[k] + current * resist_integral(r[k], r[k + 1], d);

  sol.max_nodal_error = 0.0;
  for (Index k = 0; k < n; ++k)
    sol.max_nodal_error =
        std::max(sol.max_nodal_error, std::abs(sol.values[k] - closed(r[k])));
  return sol;
}

double capacity_variational(int d, double r_trunc, const RadialGrid& grid) {
  if (d < 3)
    throw_error(Error::Code::Argument,
                "variational capacity requires d >= 3 (the 2-D point capacity "
                "is degenerate; use the corrector asymptotics)");
  if (!(r_trunc > 1.0))
    throw_error(Error::Code::Argument, "truncation radius must exceed 1");
  const RealVec& r = grid.nodes;
  if (r.size() < 2 || std::abs(r[0] - 1.0) > 1e-12 ||
      std::abs(r[r.size() - 1] - r_trunc) > 1e-9 * r_trunc)
    throw_error(Error::Code::Argument, "grid must span [1, R_trunc]");

  // Piecewise-linear minimizer of S_d sum (du/h)^2 int r^{d-1}: a resistor
  // chain with conductances c_i = S_d (r_{i+1}^d - r_i^d) / (d h_i^2).
  const double sd = surface_area_unit_ball(d);
  double resistance = 0.0;
  for (Index i = 0; i + 1 < r.size(); ++i) {
    const double h = r[i + 1] - r[i];
    const double ci =
        sd * (std::pow(r[i + 1], d) - std::pow(r[i], d)) / (d * h * h);
    resistance += 1.0 / ci;
  }
  return 1.0 / resistance;
}

double capacity_extrapolated(int d, double r_trunc, int n_nodes) {
  const RadialGrid grid = radial_grid(1.0, r_trunc, n_nodes - 1, true);
  const double e = capacity_variational(d, r_trunc, grid);
  return e * (1.0 - std::pow(r_trunc, 2 - d));
}

Complex mu_percell(const BoundaryKind& bc, double eps, int d, bool unit_trace,
                   double neumann_exponent) {
  bc.validate();
  if (bc.kind == BcKind::Neumann) return {0.0, 0.0};
  PerforationSpec spec;
  spec.domain.dim = d;
  spec.domain.box = std::vector<double>(d, 1.0);
  spec.epsilon = eps;
  spec.bc = bc;
  spec.neumann_exponent = neumann_exponent;
  const double a = hole_radius(spec);
  const double cell = std::pow(2.0 * eps, d);
  const CorrectorSolution w = corrector_radial(bc, a, eps, d, 8);
  if (bc.kind == BcKind::Dirichlet) return w.flux_outer / cell;
  const Complex trace = unit_trace ? Complex(1.0, 0.0) : w.w_at_hole;
  return bc.alpha * surface_area_unit_ball(d) * std::pow(a, d - 1) * trace /
         cell;
}

ScalarField make_source(const SourceSpec& spec) {
  if (spec.name == "zero")
    return [](double, double) { return Complex(0.0, 0.0); };
  if (spec.name == "one")
    return [](double, double) { return Complex(1.0, 0.0); };
  if (spec.name == "sin2d")
    return [](double x, double y) {
      return Complex(std::sin(kPi * x) * std::sin(kPi * y), 0.0);
    };
  if (spec.name == "gauss") {
    const double cx = spec.cx, cy = spec.cy, s2 = 2.0 * spec.sigma * spec.sigma;
    return [cx, cy, s2](double x, double y) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      return Complex(std::exp(-d2 / s2), 0.0);
    };
  }
  if (spec.name == "cube") {
    const double lo = spec.cube, hi = spec.cube + 1.0;
    return [lo, hi](double x, double) {
      return Complex(x >= lo && x < hi ? 1.0 : 0.0, 0.0);
    };
  }
  throw_error(Error::Code::Validation, "unknown source name: " + spec.name);
}

double field_l2_norm(const Mesh& mesh, const ScalarField& f) {
  double sum = 0.0;
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    Vec2 p[3];
    for (int k = 0; k < 3; ++k)
      p[k] = mesh.vertices.row(mesh.triangles(t, k)).transpose();
    const double area = mesh.triangle_area(t);
    const Vec2 q[3] = {0.5 * (p[0] + p[1]), 0.5 * (p[1] + p[2]),
                       0.5 * (p[2] + p[0])};
    double s = 0.0;
    for (const auto& qq : q) s += std::norm(f(qq.x(), qq.y()));
    sum += s * area / 3.0;
  }
  return std::sqrt(sum);
}

double MeshPolicy::h_for(double eps) const {
  return std::min(h_far_cap, h_far_factor * eps);
}

ResolventPair::ResolventPair(const PerforationSpec& spec,
                             const MeshPolicy& policy, double solve_tol) {
  spec.validate();
  auto owned = std::make_shared<MeshPair>(mesh_perforated_pair(
      spec, policy.h_for(spec.epsilon), policy.grading, policy.options));
  perf_ = std::shared_ptr<const Mesh>(owned, &owned->perforated);
  full_ = std::shared_ptr<const Mesh>(owned, &owned->full);
  pair_view_.perforated = owned->perforated;  // copies for the extension ops
  pair_view_.full = owned->full;
  pair_view_.plug_vertices = owned->plug_vertices;
  pair_view_.plug_triangles = owned->plug_triangles;

  op_eps_ =
      build_operator(perf_, spec.bc, Complex(0.0, 0.0), Complex(0.0, 0.0));
  const StrangeTerm st = strange_term(spec.bc, spec.domain.dim);
  op_lim_ = build_operator(full_, spec.bc, st.mu, Complex(0.0, 0.0));
  solver_eps_ = std::make_shared<OperatorSolver>(op_eps_, solve_tol);
  solver_lim_ = std::make_shared<OperatorSolver>(op_lim_, solve_tol);
  mass_full_lu_ = std::make_shared<Factorization>(op_lim_.M);
}

Vec ResolventPair::solve_eps(const ScalarField& f) const {
  return solver_eps_->solve(assemble_load(*perf_, f)).first;
}

Vec ResolventPair::solve_limit(const ScalarField& f) const {
  return solver_lim_->solve(assemble_load(*full_, f)).first;
}

Vec ResolventPair::difference(const ScalarField& f) const {
  const Vec u_eps = solve_eps(f);
  const Vec u_lim = solve_limit(f);
  Vec out = -u_lim;
  out.head(perf_->n_vertices()) += u_eps;
  return out;
}

Vec ResolventPair::difference_nodal(const Vec& f_full) const {
  if (f_full.size() != full_->n_vertices())
    throw_error(Error::Code::Argument, "field size does not match full mesh");
  const Index np = perf_->n_vertices();
  const Vec u_eps = solver_eps_->solve(Vec(op_eps_.M * f_full.head(np))).first;
  const Vec u_lim = solver_lim_->solve(Vec(op_lim_.M * f_full)).first;
  Vec out = -u_lim;
  out.head(np) += u_eps;
  return out;
}

double ResolventPair::defect(const ScalarField& f) const {
  const Vec u_eps = solve_eps(f);
  const Vec u_lim = solve_limit(f);
  return l2_defect(*perf_, u_eps, *full_, u_lim);
}

OpNormReport ResolventPair::delta_estimate(double tol,
                                           std::uint64_t seed) const {
  const Index np = perf_->n_vertices();
  const Index nf = full_->n_vertices();
  const SpMat& m_perf = op_eps_.M;
  const SpMat& m_full = op_lim_.M;

  LinearMap map;
  map.in_dim = map.out_dim = nf;
  map.apply = [this, np, &m_perf, &m_full](const Vec& x) {
    const Vec u1 = solver_eps_->op().from_free(solver_eps_->solve_reduced(
        solver_eps_->op().to_free(Vec(m_perf * x.head(np)))));
    const Vec u2 = solver_lim_->op().from_free(solver_lim_->solve_reduced(
        solver_lim_->op().to_free(Vec(m_full * x))));
    Vec y = -u2;
    y.head(np) += u1;
    return y;
  };
  map.apply_adjoint = [this, np, &m_perf, &m_full](const Vec& y) {
    // D^# y = M_full^{-1} (Z M_perf F_eps^* S - M_full F_lim^*) M_full y
    const Vec w = m_full * y;
    const Vec t1 =
        m_perf * solver_eps_->op().from_free(solver_eps_->solve_adjoint_reduced(
                     solver_eps_->op().to_free(Vec(w.head(np)))));
    const Vec t2 = solver_lim_->op().from_free(
        solver_lim_->solve_adjoint_reduced(solver_lim_->op().to_free(w)));
    Vec z = Vec::Zero(w.size());
    z.head(np) = t1;
    return Vec(mass_full_lu_->solve(z) - t2);
  };
  return opnorm_diff(map, m_full, tol, seed);
}

double ResolventPair::extension_constant(const ScalarField& f) const {
  return extension_energy_constant(pair_view_, solve_eps(f));
}

std::vector<ConvergenceRecord> resolvent_sweep(const SweepConfig& cfg) {
  if (cfg.eps_list.empty())
    throw_error(Error::Code::Argument, "empty epsilon list");

  auto run_row = [&cfg](size_t idx) {
    const double eps = cfg.eps_list[idx];
    ConvergenceRecord rec;
    rec.epsilon = eps;
    rec.h_far = cfg.mesh.h_for(eps);
    rec.delta_eps = std::numeric_limits<double>::quiet_NaN();
    const double t0 = wall_seconds();
    try {
      PerforationSpec spec = cfg.base;
      spec.epsilon = eps;
      const ResolventPair rp(spec, cfg.mesh, cfg.solve_tol);
      rec.dofs = rp.dofs();
      const ScalarField f = make_source(cfg.source);
      rec.defect = rp.defect(f);
      if (cfg.compute_delta) {
        const auto rep =
            rp.delta_estimate(cfg.delta_tol, Rng::substream(cfg.seed, idx));
        rec.delta_eps = rep.value;
        if (!rep.converged) rec.status = "delta_unconverged";
      }
      if (cfg.compute_lambda1) {
        const auto eig = eigs_smallest(rp.op_eps(), 1, 1e-8);
        if (!eig.pairs.empty()) rec.lambda1 = eig.pairs[0].lambda;
      }
    } catch (const Error& e) {
      rec.status = std::string("failed:") + error_code_name(e.code);
    }
    rec.seconds = wall_seconds() - t0;
    return rec;
  };

  std::vector<ConvergenceRecord> rows(cfg.eps_list.size());
  if (cfg.threads > 1) {
    std::vector<std::future<ConvergenceRecord>> futs;
    futs.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
      futs.push_back(std::async(std::launch::async, run_row, i));
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = futs[i].get();
  } else {
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = run_row(i);
  }
  return rows;
}

double DecayCheckConfig::big_m() const {
  return std::max(2.0, 1.0 / (lambda - 0.5));
}

DecayCheckReport weighted_decay_check(const DecayCheckConfig& cfg,
                                      std::uint64_t seed) {
  if (!(cfg.lambda > 0.5))
    throw_error(Error::Code::Argument,
                "weighted decay requires lambda > 1/2 (paper hypothesis)");
  cfg.strip.validate();
  cfg.bc.validate();
  if (cfg.strip.dim != 2)
    throw_error(Error::Code::Argument, "decay checks run on 2-D strips");
  if (cfg.cube_index < 0 || cfg.cube_index + 1 > cfg.strip.box[0])
    throw_error(Error::Code::Argument, "source cube outside the strip");

  auto mesh = std::make_shared<const Mesh>(mesh_full_domain(cfg.strip, cfg.h));
  auto op = build_operator(mesh, cfg.bc, Complex(0.0, 0.0),
                           Complex(cfg.lambda - 1.0, 0.0));

  // random nodal source supported strictly inside the cube
  const double s = mesh->h_max;  // structured spacing
  const double lo = cfg.cube_index + 1.0001 * s;
  const double hi = cfg.cube_index + 1.0 - 1.0001 * s;
  Rng rng(seed);
  Vec f = Vec::Zero(mesh->n_vertices());
  Index inside = 0;
  for (Index v = 0; v < mesh->n_vertices(); ++v) {
    const double x = mesh->vertices(v, 0);
    if (x >= lo && x <= hi) {
      f[v] = rng.cnormal();
      ++inside;
    }
  }
  if (inside == 0)
    throw_error(Error::Code::Argument, "mesh too coarse for an interior source");

  WeightSpec w;
  w.center = Vec2(cfg.cube_index + 0.5, 0.5 * cfg.strip.box[1]);
  const SpMat wm = assemble_weighted_mass(*mesh, w);
  const SpMat wk = assemble_weighted_stiffness(*mesh, w);

  const Vec u = solve(op, Vec(op.M * f)).first;

  DecayCheckReport rep;
  rep.big_m = cfg.big_m();
  const double denom = mass_inner(wm, f, f).real();
  if (denom > 0.0) {
    rep.r1 = mass_inner(wm, u, u).real() / denom;
    rep.r2 = mass_inner(wk, u, u).real() / denom;
  }
  rep.pass1 = rep.r1 <= rep.big_m * (1.0 + cfg.tol_disc);
  rep.pass2 = rep.r2 <= rep.big_m * (1.0 + cfg.tol_disc);
  return rep;
}

namespace {

ScalarField cube_mask(const ScalarField& f, int cube) {
  const double lo = cube, hi = cube + 1.0;
  return [f, lo, hi](double x, double y) {
    return (x >= lo && x < hi) ? f(x, y) : Complex(0.0, 0.0);
  };
}

}  // namespace

InteractionResult interaction_decay(const ResolventPair& pair, int cube_i,
                                    int cube_j, const ScalarField& f_i,
                                    const ScalarField& f_j) {
  if (cube_i == cube_j)
    throw_error(
        Error::Code::Argument,
        "interaction requires distinct cubes (supports must not overlap)");
  const ScalarField fi = cube_mask(f_i, cube_i);
  const ScalarField fj = cube_mask(f_j, cube_j);

  InteractionResult res;
  res.norm_fi = field_l2_norm(pair.full(), fi);
  res.norm_fj = field_l2_norm(pair.full(), fj);
  const Vec ui = pair.difference(fi);
  const Vec uj = pair.difference(fj);
  res.inner = mass_inner(pair.op_limit().M, ui, uj);
  const double bound =
      res.norm_fi * res.norm_fj * std::exp(-std::abs(cube_i - cube_j) / 2.0);
  res.ratio = bound > 0.0 ? std::abs(res.inner) / bound : 0.0;
  return res;
}

DecompositionReport decomposition_inequality_check(
    const ResolventPair& pair, const ScalarField& f,
    const std::vector<int>& cubes, int n) {
  if (n <= 1)
    throw_error(Error::Code::Argument, "decomposition requires n > 1");
  DecompositionReport rep;
  rep.n = n;
  rep.n_cubes = static_cast<int>(cubes.size());
  rep.f_norm = field_l2_norm(pair.perforated(), f);

  Vec total = Vec::Zero(pair.full().n_vertices());
  for (int c : cubes) {
    const Vec ui = pair.difference(cube_mask(f, c));
    rep.sum_norms2 += mass_inner(pair.op_limit().M, ui, ui).real();
    total += ui;
  }
  rep.lhs = mass_inner(pair.op_limit().M, total, total).real();
  const double rhs =
      std::pow(double(n), 3) * rep.sum_norms2 + rep.f_norm * std::exp(-n / 3.0);
  rep.c_min = rhs > 0.0 ? rep.lhs / rhs : 0.0;
  return rep;
}

}  // namespace perfhom
