// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include "perfhom/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "perfhom/rng.hpp"

namespace perfhom {

namespace {

double wall_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

struct Factorization::Impl {
  Eigen::SparseLU<SpMatCol> lu;
};

Factorization::Factorization(const SpMat& a) : impl_(new Impl), n_(a.rows()) {
  SpMatCol col(a);
  impl_->lu.compute(col);
  if (impl_->lu.info() != Eigen::Success)
    throw_error(Error::Code::Solver, "sparse LU factorization failed");
}

Vec Factorization::solve(const Vec& rhs) const { return impl_->lu.solve(rhs); }

Vec Factorization::solve_adjoint(const Vec& rhs) const {
  // A^T = A for every assembled system, so A^* x = b  <=>  conj(A conj(x)).
  return impl_->lu.solve(rhs.conjugate()).conjugate();
}

OperatorSolver::OperatorSolver(const DiscreteOperator& op, double tol)
    : op_(&op), tol_(tol) {
  if (op.n_free() == 0)
    throw_error(Error::Code::Argument, "operator has no free unknowns");
  if (op.n_free() <= kDirectSolveLimit)
    fact_ = std::make_shared<Factorization>(op.A_red);
}

Vec OperatorSolver::solve_reduced(const Vec& rhs_red) const {
  if (fact_) {
    Vec x = fact_->solve(rhs_red);
    // one step of iterative refinement
    const Vec r = rhs_red - op_->A_red * x;
    x += fact_->solve(r);
    return x;
  }
  if (op_->symmetry == Symmetry::Hermitian) {
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg(op_->A_red);
    cg.setTolerance(tol_);
    cg.setMaxIterations(20000);
    return cg.solve(rhs_red);
  }
  Eigen::BiCGSTAB<SpMat> bi(op_->A_red);
  bi.setTolerance(tol_);
  bi.setMaxIterations(20000);
  return bi.solve(rhs_red);
}

Vec OperatorSolver::solve_adjoint_reduced(const Vec& rhs_red) const {
  if (fact_) {
    Vec x = fact_->solve_adjoint(rhs_red);
    const Vec r = rhs_red - op_->A_red.adjoint() * x;
    x += fact_->solve_adjoint(r);
    return x;
  }
  const SpMat ah = op_->A_red.adjoint();
  Eigen::BiCGSTAB<SpMat> bi(ah);
  bi.setTolerance(tol_);
  bi.setMaxIterations(20000);
  return bi.solve(rhs_red);
}

std::pair<Vec, SolveReport> OperatorSolver::solve(const Vec& rhs) const {
  if (rhs.size() != op_->n())
    throw_error(Error::Code::Argument, "rhs size does not match the operator");
  const double t0 = wall_seconds();
  SolveReport rep;
  rep.reused_factorization = used_once_;
  used_once_ = true;

  const Vec rhs_red = op_->to_free(rhs);
  const Vec x_red = solve_reduced(rhs_red);
  const double rn = rhs_red.norm();
  rep.rel_residual =
      rn > 0.0 ? (rhs_red - op_->A_red * x_red).norm() / rn : 0.0;
  rep.iterations = fact_ ? 1 : -1;
  rep.seconds = wall_seconds() - t0;
  if (!(rep.rel_residual <= tol_) && rn > 0.0)
    throw_error(Error::Code::Solver,
                "linear solve did not reach the requested tolerance: residual " +
                    std::to_string(rep.rel_residual));
  return {op_->from_free(x_red), rep};
}

std::pair<Vec, SolveReport> solve(const DiscreteOperator& op, const Vec& rhs,
                                  double tol) {
  return OperatorSolver(op, tol).solve(rhs);
}

namespace {

// M-orthonormalization by modified Gram-Schmidt (columns of V).
void orthonormalize(Eigen::MatrixXcd& v, const SpMat& m) {
  for (Index j = 0; j < v.cols(); ++j) {
    for (Index k = 0; k < j; ++k) {
      const Complex c = (v.col(k).adjoint() * (m * v.col(j)))[0];
      v.col(j) -= c * v.col(k);
    }
    const double nrm = std::sqrt(
        std::max(0.0, (v.col(j).adjoint() * (m * v.col(j)))[0].real()));
    if (nrm > 1e-14) v.col(j) /= nrm;
  }
}

struct ShiftResult {
  std::vector<EigenPair> accepted;  // reduced-space vectors
  double trust = 0.0;               // radius around the shift reliably covered
};

ShiftResult run_shift(const DiscreteOperator& op, Complex sigma, int block,
                      double tol, Rng& rng) {
  const Index n = op.n_free();
  const int p = static_cast<int>(std::min<Index>(block, n));
  const SpMat shifted = op.A_red - sigma * op.M_red;
  std::shared_ptr<Factorization> fact;
  try {
    fact = std::make_shared<Factorization>(shifted);
  } catch (const Error&) {
    // shift hit an eigenvalue; nudge deterministically
    const Complex nudged = sigma + Complex(1e-8 * (1.0 + std::abs(sigma)), 0.0);
    fact = std::make_shared<Factorization>(SpMat(op.A_red - nudged * op.M_red));
  }

  Eigen::MatrixXcd v(n, p);
  for (Index i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) v(i, j) = rng.cnormal();
  orthonormalize(v, op.M_red);

  Eigen::VectorXcd prev = Eigen::VectorXcd::Zero(p);
  Eigen::MatrixXcd ritz_vecs;
  Eigen::VectorXcd ritz_vals;
  const int max_sweeps = 40;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::MatrixXcd w(n, p);
    for (int j = 0; j < p; ++j) w.col(j) = fact->solve(op.M_red * v.col(j));
    orthonormalize(w, op.M_red);
    v = w;

    // Rayleigh-Ritz on the original pencil
    Eigen::MatrixXcd g = v.adjoint() * (op.A_red * v);
    Eigen::MatrixXcd h = v.adjoint() * (op.M_red * v);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h.inverse() * g);
    ritz_vals = es.eigenvalues();
    ritz_vecs = v * es.eigenvectors();

    // sort by distance to the shift
    std::vector<int> idx(p);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return std::abs(ritz_vals[a] - sigma) < std::abs(ritz_vals[b] - sigma);
    });
    Eigen::VectorXcd sorted_vals(p);
    Eigen::MatrixXcd sorted_vecs(n, p);
    for (int j = 0; j < p; ++j) {
      sorted_vals[j] = ritz_vals[idx[j]];
      sorted_vecs.col(j) = ritz_vecs.col(idx[j]);
    }
    ritz_vals = sorted_vals;
    ritz_vecs = sorted_vecs;

    double drift = 0.0;
    for (int j = 0; j < p; ++j)
      drift = std::max(drift, std::abs(ritz_vals[j] - prev[j]) /
                                  (1.0 + std::abs(ritz_vals[j])));
    prev = ritz_vals;
    if (drift < 0.01 * tol && sweep >= 3) break;
  }

  ShiftResult out;
  // eigenvalues inside half the distance to the furthest Ritz value are
  // reliably resolved by the block
  const double far = std::abs(ritz_vals[p - 1] - sigma);
  out.trust = (p == static_cast<int>(n)) ? std::numeric_limits<double>::infinity()
                                         : 0.5 * far;
  for (int j = 0; j < p; ++j) {
    Vec y = ritz_vecs.col(j);
    const double yn = y.norm();
    if (yn == 0.0) continue;
    y /= yn;
    const double res = (op.A_red * y - ritz_vals[j] * (op.M_red * y)).norm();
    if (res <= tol) {
      EigenPair pair;
      pair.lambda = ritz_vals[j];
      pair.v = y;
      pair.residual = res;
      out.accepted.push_back(std::move(pair));
    }
  }
  return out;
}

}  // namespace

EigenResult eigs_window(const DiscreteOperator& op, double lo, double hi,
                        int k_max, double tol) {
  if (!(lo < hi))
    throw_error(Error::Code::Argument, "eigenvalue window must satisfy lo < hi");
  if (k_max < 1) throw_error(Error::Code::Argument, "k_max must be >= 1");

  EigenResult result;
  const Index n = op.n_free();
  if (n == 0) return result;

  Rng rng(0x5eed0001u);
  const int block = static_cast<int>(std::min<Index>(
      std::max(12, std::min(k_max + 6, 40)), n));

  struct Hit {
    Complex lambda;
    Vec v;
    double residual;
    int shift_id;
  };
  std::vector<Hit> hits;

  // Coverage-driven shift sweep over [lo, hi].
  std::vector<std::pair<double, double>> pending{{lo, hi}};
  int shift_budget = 16;
  int shift_id = 0;
  bool all_converged = true;
  while (!pending.empty() && shift_budget > 0) {
    std::sort(pending.begin(), pending.end(),
              [](const auto& a, const auto& b) {
                return (a.second - a.first) < (b.second - b.first);
              });
    const auto [a, b] = pending.back();
    pending.pop_back();
    const double sigma = 0.5 * (a + b);
    --shift_budget;
    ShiftResult sr = run_shift(op, Complex(sigma, 0.0), block, tol, rng);
    for (auto& pr : sr.accepted) {
      if (std::abs(pr.lambda - Complex(sigma, 0.0)) > sr.trust) continue;
      hits.push_back({pr.lambda, std::move(pr.v), pr.residual, shift_id});
    }
    ++shift_id;
    double trust = sr.trust;
    if (!(trust > 0.0) || !std::isfinite(trust)) {
      if (!std::isfinite(trust)) trust = b - a;  // whole pencil resolved
      else {
        all_converged = false;
        trust = 0.26 * (b - a);  // make progress, flag partial coverage
      }
    }
    const double cov_lo = sigma - trust, cov_hi = sigma + trust;
    if (cov_lo - a > 1e-12 * (hi - lo)) pending.push_back({a, cov_lo});
    if (b - cov_hi > 1e-12 * (hi - lo)) pending.push_back({cov_hi, b});
  }
  if (!pending.empty()) all_converged = false;

  // window filter + 1e-8 clustering dedup (multiplicity kept per shift)
  std::vector<Hit> in_window;
  for (auto& h : hits)
    if (h.lambda.real() >= lo && h.lambda.real() <= hi)
      in_window.push_back(std::move(h));
  std::sort(in_window.begin(), in_window.end(), [](const Hit& x, const Hit& y) {
    if (x.lambda.real() != y.lambda.real())
      return x.lambda.real() < y.lambda.real();
    return x.lambda.imag() < y.lambda.imag();
  });

  std::vector<std::vector<Hit>> clusters;
  for (auto& h : in_window) {
    const double ctol = 1e-8 * std::max(1.0, std::abs(h.lambda));
    if (clusters.empty() ||
        std::abs(clusters.back().back().lambda - h.lambda) > ctol)
      clusters.emplace_back();
    clusters.back().push_back(std::move(h));
  }

  for (auto& cluster : clusters) {
    // multiplicity = max copies seen by any single shift
    std::map<int, int> per_shift;
    for (const auto& h : cluster) ++per_shift[h.shift_id];
    int mult = 0;
    for (const auto& [sid, c] : per_shift) mult = std::max(mult, c);
    std::sort(cluster.begin(), cluster.end(),
              [](const Hit& x, const Hit& y) { return x.residual < y.residual; });
    for (int k = 0; k < mult && k < static_cast<int>(cluster.size()); ++k) {
      EigenPair pair;
      pair.lambda = cluster[k].lambda;
      pair.v = op.from_free(cluster[k].v);
      pair.residual = cluster[k].residual;
      result.pairs.push_back(std::move(pair));
    }
  }

  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const EigenPair& x, const EigenPair& y) {
              if (x.lambda.real() != y.lambda.real())
                return x.lambda.real() < y.lambda.real();
              return x.lambda.imag() < y.lambda.imag();
            });
  if (static_cast<int>(result.pairs.size()) > k_max)
    result.pairs.resize(k_max);
  result.converged = all_converged;
  return result;
}

EigenResult eigs_smallest(const DiscreteOperator& op, int k, double tol) {
  if (k < 1) throw_error(Error::Code::Argument, "k must be >= 1");
  EigenResult result;
  if (op.n_free() == 0) return result;
  Rng rng(0x5eed0002u);
  const int block =
      static_cast<int>(std::min<Index>(std::max(8, k + 4), op.n_free()));
  ShiftResult sr = run_shift(op, Complex(0.0, 0.0), block, tol, rng);
  std::sort(sr.accepted.begin(), sr.accepted.end(),
            [](const EigenPair& a, const EigenPair& b) {
              return std::abs(a.lambda) < std::abs(b.lambda);
            });
  for (int i = 0; i < k && i < static_cast<int>(sr.accepted.size()); ++i) {
    EigenPair p;
    p.lambda = sr.accepted[i].lambda;
    p.v = op.from_free(sr.accepted[i].v);
    p.residual = sr.accepted[i].residual;
    result.pairs.push_back(std::move(p));
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const EigenPair& a, const EigenPair& b) {
              return a.lambda.real() < b.lambda.real();
            });
  result.converged = !result.pairs.empty();
  return result;
}

OpNormReport opnorm_diff(const LinearMap& map, const SpMat& mass_in, double tol,
                         std::uint64_t seed, int max_iter) {
  if (map.in_dim <= 0)
    throw_error(Error::Code::Argument, "operator norm needs a positive dimension");
  Rng rng(seed);
  Vec x(map.in_dim);
  for (Index i = 0; i < x.size(); ++i) x[i] = rng.cnormal();
  double xn = mass_norm(mass_in, x);
  if (xn == 0.0) xn = 1.0;
  x /= xn;

  OpNormReport rep;
  double prev = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec y = map.apply(x);
    Vec z = map.apply_adjoint(y);
    // sigma^2 = <x, D^# D x>_{M_in} for M_in-normalized x
    const double s2 = std::max(0.0, mass_inner(mass_in, x, z).real());
    rep.value = std::sqrt(s2);
    rep.iterations = it;
    if (rep.value == 0.0) {
      rep.converged = true;
      return rep;
    }
    if (prev >= 0.0 && std::abs(rep.value - prev) <= tol * rep.value) {
      rep.converged = true;
      return rep;
    }
    prev = rep.value;
    const double zn = mass_norm(mass_in, z);
    if (zn == 0.0) {
      rep.converged = true;
      rep.value = 0.0;
      return rep;
    }
    x = z / zn;
  }
  rep.converged = false;
  return rep;
}

Propagator::Propagator(const DiscreteOperator& op) : op_(&op) {
  if (op.symmetry == Symmetry::None)
    throw_error(Error::Code::Argument,
                "propagator requires a (complex-)symmetric system");
}

Vec Propagator::propagate(double t, Vec u, double tol) const {
  if (t == 0.0) return u;
  const double t_total = t;
  auto factor = [&](double dt) -> std::shared_ptr<Factorization> {
    auto it = cache_.find(dt);
    if (it != cache_.end()) return it->second;
    SpMat sys = op_->M_red + Complex(0.5 * dt, 0.0) * op_->A_red;
    auto f = std::make_shared<Factorization>(sys);
    cache_.emplace(dt, f);
    return f;
  };
  auto step = [&](const Vec& v, double dt) -> Vec {
    const Vec rhs = op_->M_red * v - Complex(0.5 * dt, 0.0) * (op_->A_red * v);
    return factor(dt)->solve(rhs);
  };

  // Dyadic steps dt = t / 2^k, k <= 40, tracked in exact integer units of
  // t / 2^40 so the loop terminates without floating-point dust.
  constexpr int kMaxLevel = 40;
  int k = 3;
  long long remaining_units = 1LL << kMaxLevel;
  int guard = 0;
  while (remaining_units > 0) {
    if (k > kMaxLevel)
      throw_error(Error::Code::Numerical, "time step underflow in expm_apply");
    if (++guard > 4'000'000)
      throw_error(Error::Code::Numerical, "step control failed to advance");
    const long long dt_units = 1LL << (kMaxLevel - k);
    if (dt_units > remaining_units) {
      ++k;
      continue;
    }
    const double dt = t_total / std::ldexp(1.0, k);
    const Vec coarse = step(u, dt);
    const Vec fine = step(step(u, 0.5 * dt), 0.5 * dt);
    const double scale = std::max(mass_norm(op_->M_red, fine), 1e-300);
    const double err = mass_norm(op_->M_red, Vec(coarse - fine)) / scale;
    // floor the per-step budget at roundoff so the doubling estimate cannot
    // demand more accuracy than the arithmetic carries
    const double budget = std::max(
        tol * dt / t_total, 100.0 * std::numeric_limits<double>::epsilon());
    if (err > budget && k < kMaxLevel) {
      ++k;  // reject, halve the step
      continue;
    }
    u = fine;
    remaining_units -= dt_units;
    if (err < 0.05 * budget && k > 1 && 2 * dt_units <= remaining_units) --k;
  }
  return u;
}

Vec Propagator::apply(double t, const Vec& v_full, double tol) const {
  if (t < 0.0) throw_error(Error::Code::Argument, "expm requires t >= 0");
  if (v_full.size() != op_->n())
    throw_error(Error::Code::Argument, "vector size does not match operator");
  if (t == 0.0) return v_full;
  Vec u = op_->to_free(v_full);
  u = propagate(t, std::move(u), tol);
  return op_->from_free(u);
}

Vec Propagator::apply_adjoint(double t, const Vec& v_full, double tol) const {
  // A^T = A  =>  e^{-t M^{-1} A^*} x = conj(e^{-t M^{-1} A} conj(x))
  return apply(t, v_full.conjugate(), tol).conjugate();
}

Vec expm_apply(const DiscreteOperator& op, double t, const Vec& v, double tol) {
  return Propagator(op).apply(t, v, tol);
}

}  // namespace perfhom
