// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include "perfhom/rng.hpp"
#include "perfhom/solvers.hpp"

using namespace perfhom;

namespace {

DomainSpec unit_square() {
  DomainSpec d;
  d.dim = 2;
  d.box = {1.0, 1.0};
  return d;
}

std::shared_ptr<const Mesh> square_mesh(double h) {
  return std::make_shared<Mesh>(mesh_full_domain(unit_square(), h));
}

// dense generalized eigenvalues of (A_red, M_red), sorted by real part
std::vector<Complex> dense_eigs(const DiscreteOperator& op) {
  const Eigen::MatrixXcd a(op.A_red);
  const Eigen::MatrixXcd m(op.M_red);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m.inverse() * a);
  std::vector<Complex> out(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end(), [](Complex x, Complex y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return out;
}

}  // namespace

TEST_CASE("direct solve: constants solve (-Lap+1)u = 1 with Neumann data") {
  auto mesh = square_mesh(0.125);
  auto op = build_operator(mesh, BoundaryKind::neumann(), 0.0, 0.0);
  const Vec rhs = op.M * Vec::Ones(op.n());
  auto [u, rep] = solve(op, rhs, 1e-10);
  CHECK(rep.rel_residual <= 1e-10);
  CHECK((u - Vec::Ones(op.n())).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("solve contract: residual below tolerance for random rhs") {
  MeshPair pair = [] {
    PerforationSpec spec;
    spec.domain = unit_square();
    spec.epsilon = 0.25;
    spec.bc = BoundaryKind::robin({1.0, 1.0});
    return mesh_perforated_pair(spec, 0.125, 1.5);
  }();
  auto mesh = std::make_shared<Mesh>(pair.perforated);
  auto op = build_operator(mesh, BoundaryKind::robin({1.0, 1.0}), 0.0, 0.0);

  Rng rng(17);
  Vec rhs(op.n());
  for (Index i = 0; i < rhs.size(); ++i) rhs[i] = rng.cnormal();
  auto [u, rep] = solve(op, rhs, 1e-10);
  const Vec res = op.to_free(rhs) - op.A_red * op.to_free(u);
  CHECK(res.norm() / op.to_free(rhs).norm() <= 1e-10);

  // adjoint solve of the complex-symmetric system via conjugation
  OperatorSolver solver(op);
  const Vec rhs_red = op.to_free(rhs);
  const Vec adj = solver.solve_adjoint_reduced(rhs_red.conjugate());
  const Vec direct = solver.solve_reduced(rhs_red);
  CHECK((adj - direct.conjugate()).norm() <= 1e-9 * direct.norm());
}

TEST_CASE("eigs window on the Dirichlet unit square") {
  auto mesh = square_mesh(1.0 / 32.0);
  auto op = build_operator(mesh, BoundaryKind::dirichlet(), 0.0, 0.0);

  // smallest eigenvalue of -Lap+1: 2 pi^2 + 1, separation of variables
  auto res = eigs_window(op, 15.0, 60.0, 8, 1e-8);
  REQUIRE(!res.pairs.empty());
  const double l1 = 2.0 * M_PI * M_PI + 1.0;
  CHECK(res.pairs[0].lambda.real() == doctest::Approx(l1).epsilon(5e-3));
  CHECK(std::abs(res.pairs[0].lambda.imag()) <= 1e-9);
  CHECK(res.pairs[0].residual <= 1e-8);

  // second eigenvalue 5 pi^2 + 1 is double: (1,2) and (2,1)
  const double l2 = 5.0 * M_PI * M_PI + 1.0;
  int count_l2 = 0;
  for (const auto& p : res.pairs)
    if (std::abs(p.lambda.real() - l2) < 0.02 * l2) ++count_l2;
  CHECK(count_l2 == 2);

  // window below the coercivity bound is empty
  auto low = eigs_window(op, -1.0, 0.9, 4, 1e-8);
  CHECK(low.pairs.empty());
}

TEST_CASE("eigs window matches a dense oracle on small meshes") {
  auto mesh = square_mesh(1.0 / 8.0);  // 81 vertices
  for (auto bc : {BoundaryKind::dirichlet(), BoundaryKind::robin({1.0, 1.0})}) {
    auto op = build_operator(mesh, bc, Complex(0.2, 0.1), 0.0);
    REQUIRE(op.n_free() <= 300);
    const auto dense = dense_eigs(op);
    const double lo = 1.0, hi = 90.0;
    auto res = eigs_window(op, lo, hi, 32, 1e-10);
    std::vector<Complex> expected;
    for (Complex l : dense)
      if (l.real() >= lo && l.real() <= hi) expected.push_back(l);
    REQUIRE(res.pairs.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i)
      CHECK(std::abs(res.pairs[i].lambda - expected[i]) <=
            1e-8 * std::max(1.0, std::abs(expected[i])));
  }
}

TEST_CASE("operator norm estimation") {
  SUBCASE("zero map") {
    const Index n = 20;
    SpMat eye(n, n);
    eye.setIdentity();
    LinearMap zero{n, n, [](const Vec& x) { return Vec(Vec::Zero(x.size())); },
                   [](const Vec& x) { return Vec(Vec::Zero(x.size())); }};
    const auto rep = opnorm_diff(zero, eye, 1e-3, 5);
    CHECK(rep.value == 0.0);
    CHECK(rep.converged);
  }

  SUBCASE("identity and diagonal maps in an orthonormal basis") {
    const Index n = 30;
    SpMat eye(n, n);
    eye.setIdentity();
    LinearMap ident{n, n, [](const Vec& x) { return x; },
                    [](const Vec& x) { return x; }};
    CHECK(opnorm_diff(ident, eye, 1e-4, 7).value ==
          doctest::Approx(1.0).epsilon(1e-3));

    Vec d(n);
    for (Index i = 0; i < n; ++i) d[i] = Complex(1.0 + (i % 3), 0.0);  // 1,2,3
    LinearMap diag{n, n,
                   [d](const Vec& x) { return Vec(d.asDiagonal() * x); },
                   [d](const Vec& x) {
                     return Vec(d.conjugate().asDiagonal() * x);
                   }};
    CHECK(opnorm_diff(diag, eye, 1e-4, 7).value ==
          doctest::Approx(3.0).epsilon(1e-3));
  }

  SUBCASE("random dense complex maps match an SVD oracle") {
    Rng rng(123);
    const Index n = 50;
    SpMat eye(n, n);
    eye.setIdentity();
    Eigen::MatrixXcd a(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) a(i, j) = rng.cnormal();
    LinearMap map{n, n, [&a](const Vec& x) { return Vec(a * x); },
                  [&a](const Vec& x) { return Vec(a.adjoint() * x); }};
    const auto rep = opnorm_diff(map, eye, 1e-4, 99, 2000);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
    CHECK(rep.value ==
          doctest::Approx(svd.singularValues()[0]).epsilon(1e-3));
  }
}

TEST_CASE("matrix exponential action") {
  auto mesh = square_mesh(0.25);
  // B = A - Id on the Dirichlet square: hermitian, smallest eigenvalue 2 pi^2
  auto opb = build_operator(mesh, BoundaryKind::dirichlet(), 0.0,
                            Complex(-1.0, 0.0));
  Propagator prop(opb);

  SUBCASE("t = 0 returns v exactly") {
    Rng rng(4);
    Vec v(opb.n());
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.cnormal();
    const Vec w = prop.apply(0.0, v, 1e-8);
    CHECK((w - v).norm() == 0.0);
  }

  SUBCASE("known eigenpair decays as e^{-lambda t}") {
    auto eig = eigs_window(opb, 10.0, 30.0, 2, 1e-10);
    REQUIRE(!eig.pairs.empty());
    const double lambda = eig.pairs[0].lambda.real();
    const Vec v1 = eig.pairs[0].v;
    const double t = 0.05;
    const Vec w = prop.apply(t, v1, 1e-8);
    const Vec expected = std::exp(-lambda * t) * v1;
    CHECK((w - expected).norm() <= 1e-5 * expected.norm());
  }

  SUBCASE("semigroup property and contractivity") {
    Rng rng(6);
    Vec v(opb.n());
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.cnormal();
    const double tol = 1e-7;
    const Vec w1 = prop.apply(0.3, v, tol);
    const Vec w2 = prop.apply(0.1, prop.apply(0.2, v, tol), tol);
    CHECK((w1 - w2).norm() <= 3.0 * tol * std::max(w1.norm(), 1e-30) +
                                  3.0 * tol * v.norm());
    // numerical range of B has nonnegative real part: no growth
    const double nv = mass_norm(opb.M, v);
    CHECK(mass_norm(opb.M, w1) <= nv * (1.0 + 10.0 * tol));
  }

  SUBCASE("negative t rejected") {
    Vec v = Vec::Ones(opb.n());
    CHECK_THROWS_AS((void)prop.apply(-1.0, v, 1e-6), Error);
  }
}

TEST_CASE("energy-norm monotonicity of CG iterates (hermitian path)") {
  // small SPD system solved with Eigen CG through the iterative branch is
  // exercised implicitly for n > direct limit; here we check the hermitian
  // direct path agrees with CG on a moderate mesh
  auto mesh = square_mesh(0.125);
  auto op = build_operator(mesh, BoundaryKind::dirichlet(), 0.0, 0.0);
  Rng rng(21);
  Vec rhs(op.n());
  for (Index i = 0; i < rhs.size(); ++i) rhs[i] = rng.cnormal();
  auto [u_direct, rep] = solve(op, rhs, 1e-12);

  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg(op.A_red);
  cg.setTolerance(1e-12);
  const Vec u_cg = op.from_free(cg.solve(op.to_free(rhs)));
  CHECK((u_cg - u_direct).norm() <= 1e-8 * u_direct.norm());
}
