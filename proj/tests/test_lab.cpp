// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "perfhom/lab.hpp"

using namespace perfhom;

namespace {

DomainSpec square(double l = 1.0) {
  DomainSpec d;
  d.dim = 2;
  d.box = {l, l};
  return d;
}

DomainSpec strip(double len) {
  DomainSpec d;
  d.dim = 2;
  d.box = {len, 1.0};
  d.shape = DomainShape::Strip;
  return d;
}

}  // namespace

TEST_CASE("radial correctors against closed forms") {
  SUBCASE("Dirichlet d=2 capacity potential") {
    const double a = std::exp(-4.0), eps = 0.5;
    const auto w = corrector_radial(BoundaryKind::dirichlet(), a, eps, 2, 400);
    CHECK(std::abs(w.values[0]) <= 1e-14);                       // w(a) = 0
    CHECK(std::abs(w.values[w.values.size() - 1] - 1.0) <= 1e-12);  // w(eps)=1
    // flux 2 pi / ln(eps/a) = 2 pi / 3.30685... = 1.90004
    const double flux = 2.0 * M_PI / (std::log(eps) + 4.0);
    CHECK(w.flux_outer.real() == doctest::Approx(flux).epsilon(1e-12));
    CHECK(w.flux_outer.real() == doctest::Approx(1.90004).epsilon(1e-5));
    CHECK(w.max_nodal_error <= 1e-10);
  }

  SUBCASE("Dirichlet d=3") {
    const double a = 1e-3, eps = 0.1;
    const auto w = corrector_radial(BoundaryKind::dirichlet(), a, eps, 3, 300);
    const double flux = 4.0 * M_PI / (1.0 / a - 1.0 / eps);
    CHECK(w.flux_outer.real() == doctest::Approx(flux).epsilon(1e-12));
    CHECK(w.max_nodal_error <= 1e-10);
  }

  SUBCASE("Neumann corrector is the constant 1") {
    const auto w = corrector_radial(BoundaryKind::neumann(), 0.01, 0.1, 2, 50);
    CHECK(std::abs(w.flux_outer) == 0.0);
    for (Index i = 0; i < w.values.size(); ++i)
      CHECK(w.values[i] == Complex(1.0, 0.0));
  }

  SUBCASE("Robin corrector satisfies its boundary system") {
    const double eps = 0.25, a = eps * eps;
    for (Complex alpha : {Complex(1.0, 0.0), Complex(1.0, 1.0),
                          Complex(0.0, 2.0)}) {
      const auto w =
          corrector_radial(BoundaryKind::robin(alpha), a, eps, 2, 300);
      // closed form w = c1 ln r + c2: check w(eps) = 1 and
      // -w'(a) + alpha w(a) = 0 with w'(a) = c1/a
      const Complex at_eps = w.c1 * std::log(eps) + w.c2;
      CHECK(std::abs(at_eps - Complex(1.0, 0.0)) <= 1e-13);
      const Complex bc_res = -w.c1 / a + alpha * w.w_at_hole;
      CHECK(std::abs(bc_res) <= 1e-12 * std::abs(w.c1 / a));
      CHECK(w.max_nodal_error <= 1e-10);
    }
  }

  SUBCASE("argument screening") {
    CHECK_THROWS_AS(
        (void)corrector_radial(BoundaryKind::dirichlet(), 0.5, 0.25, 2, 50),
        Error);
    CHECK_THROWS_AS(
        (void)corrector_radial(BoundaryKind::dirichlet(), 0.1, 0.25, 4, 50),
        Error);
  }
}

TEST_CASE("variational capacity in d = 3") {
  // frozen convergence behavior of the piecewise-linear minimum: O(n^-2)
  // against the closed form (d-2) S_d / (1 - R^{2-d})
  const double exact = 4.0 * M_PI / (1.0 - 0.01);
  const RadialGrid grid = radial_grid(1.0, 100.0, 1999, true);
  const double e100 = capacity_variational(3, 100.0, grid);
  CHECK(std::abs(e100 - exact) <= 2e-6 * exact);
  CHECK(e100 > exact);  // PL minimum from above
  CHECK(e100 > 4.0 * M_PI);

  // a fine grid reaches 1e-6 relative (op example)
  const RadialGrid fine = radial_grid(1.0, 100.0, 4999, true);
  CHECK(std::abs(capacity_variational(3, 100.0, fine) - exact) <=
        1e-6 * exact);

  const RadialGrid g10 = radial_grid(1.0, 10.0, 1999, true);
  const double e10 = capacity_variational(3, 10.0, g10);
  CHECK(e10 > e100);

  // R -> infinity extrapolation recovers S_3 = 4 pi, and mu_D = cap / 2^3
  const double einf = capacity_extrapolated(3, 100.0, 2000);
  CHECK(std::abs(einf - 4.0 * M_PI) <= 1e-4);
  CHECK(einf / 8.0 == doctest::Approx(M_PI / 2.0).epsilon(1e-4));

  CHECK_THROWS_AS((void)capacity_variational(2, 100.0, grid), Error);
}

TEST_CASE("per-cell strange term recovery") {
  SUBCASE("Dirichlet d=3 closed-form sequence") {
    // mu(eps) = (pi/2) / (1 - eps^2), monotone down to pi/2
    const double m1 = mu_percell(BoundaryKind::dirichlet(), 0.1, 3).real();
    CHECK(m1 == doctest::Approx(1.58666).epsilon(1e-5));
    double prev = 1e9;
    for (double eps : {0.1, 0.05, 0.025}) {
      const double m = mu_percell(BoundaryKind::dirichlet(), eps, 3).real();
      CHECK(m < prev);
      CHECK(m > M_PI / 2.0);
      prev = m;
    }
    CHECK(prev == doctest::Approx(M_PI / 2.0).epsilon(7e-4));
  }

  SUBCASE("Dirichlet d=2 closed-form sequence") {
    const double m05 = mu_percell(BoundaryKind::dirichlet(), 0.5, 2).real();
    CHECK(m05 == doctest::Approx(1.90004).epsilon(1e-5));
    CHECK(m05 / (M_PI / 2.0) == doctest::Approx(1.2096).epsilon(1e-3));
    double prev = 1e9;
    for (double eps : {0.5, 0.4, 0.3}) {
      const double m = mu_percell(BoundaryKind::dirichlet(), eps, 2).real();
      CHECK(m < prev);
      CHECK(m > M_PI / 2.0);
      prev = m;
    }
  }

  SUBCASE("Robin with unit trace is exactly alpha S_d / 2^d for every eps") {
    for (int d : {2, 3}) {
      for (Complex alpha : {Complex(1.0, 0.0), Complex(2.0, -3.0)}) {
        const Complex expected =
            alpha * surface_area_unit_ball(d) / std::pow(2.0, d);
        for (double eps : {0.25, 0.125, 0.0625, 0.03125}) {
          const Complex m =
              mu_percell(BoundaryKind::robin(alpha), eps, d, true);
          CHECK(std::abs(m - expected) <= 1e-15 * std::abs(expected));
        }
      }
    }
  }

  SUBCASE("Robin true trace converges to mu_alpha") {
    const Complex mu_exact = strange_term(BoundaryKind::robin({1.0, 0.0}), 2).mu;
    double prev = 1e9;
    for (double eps : {0.25, 0.125, 0.0625, 0.03125}) {
      const Complex m = mu_percell(BoundaryKind::robin({1.0, 0.0}), eps, 2);
      const double err = std::abs(m - mu_exact);
      CHECK(err < prev);
      prev = err;
    }
    CHECK(prev <= 0.01 * std::abs(mu_exact));
  }

  CHECK(mu_percell(BoundaryKind::neumann(), 0.1, 2) == Complex(0.0, 0.0));
}

TEST_CASE("resolvent sweep: Neumann with f = 1 gives the hole-mass defect") {
  SweepConfig cfg;
  cfg.base.domain = square();
  cfg.base.bc = BoundaryKind::neumann();
  cfg.eps_list = {0.25};
  cfg.source.name = "one";
  cfg.compute_delta = false;
  const auto rows = resolvent_sweep(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].status == "ok");

  // reference: meshed hole polygon area at the same policy
  PerforationSpec spec = cfg.base;
  spec.epsilon = 0.25;
  const Mesh perf =
      mesh_perforated(spec, cfg.mesh.h_for(0.25), cfg.mesh.grading);
  double hole_area = 0.0;
  for (const auto& h : perf.holes) hole_area += h.area();
  CHECK(rows[0].defect ==
        doctest::Approx(std::sqrt(hole_area)).epsilon(1e-10));
}

TEST_CASE("resolvent sweep: zero source gives zero defect") {
  SweepConfig cfg;
  cfg.base.domain = square();
  cfg.base.bc = BoundaryKind::robin({1.0, 0.0});
  cfg.eps_list = {0.25};
  cfg.source.name = "zero";
  cfg.compute_delta = false;
  const auto rows = resolvent_sweep(cfg);
  CHECK(rows[0].defect <= 1e-12);
}

TEST_CASE("resolvent sweep: Robin defect decreases and delta dominates") {
  SweepConfig cfg;
  cfg.base.domain = square();
  cfg.base.bc = BoundaryKind::robin({1.0, 0.0});
  cfg.eps_list = {0.25, 0.125};
  cfg.source.name = "sin2d";
  cfg.compute_delta = true;
  cfg.compute_lambda1 = true;
  const auto rows = resolvent_sweep(cfg);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) CHECK(r.status == "ok");
  CHECK(rows[1].defect < rows[0].defect);
  CHECK(rows[1].delta_eps < rows[0].delta_eps);

  // ConvergenceRecord invariant: delta >= defect / ||f|| for the f used
  PerforationSpec spec = cfg.base;
  for (size_t i = 0; i < rows.size(); ++i) {
    spec.epsilon = cfg.eps_list[i];
    const ResolventPair rp(spec, cfg.mesh);
    const double fnorm = field_l2_norm(rp.full(), make_source(cfg.source));
    CHECK(rows[i].delta_eps >= rows[i].defect / fnorm * (1.0 - 1e-2));
  }
  // lambda1 of A_eps stays above the coercivity floor 1
  CHECK(rows[0].lambda1.real() > 1.0);

  // failed rows keep the sweep alive
  SweepConfig bad = cfg;
  bad.eps_list = {0.25, 0.125e-3};
  const auto rows2 = resolvent_sweep(bad);
  CHECK(rows2[0].status == "ok");
  CHECK(rows2[1].status.substr(0, 6) == "failed");
}

TEST_CASE("extension energy constant is finite and logged") {
  PerforationSpec spec;
  spec.domain = square();
  spec.epsilon = 0.25;
  spec.bc = BoundaryKind::robin({1.0, 0.0});
  const ResolventPair rp(spec, MeshPolicy{});
  const double c = rp.extension_constant(make_source({.name = "sin2d"}));
  CHECK(c >= 0.0);
  CHECK(c < 100.0);
}

TEST_CASE("weighted decay check") {
  DecayCheckConfig cfg;
  cfg.strip = strip(4.0);
  cfg.lambda = 1.0;
  cfg.bc = BoundaryKind::robin({1.0, 0.0});
  cfg.cube_index = 1;
  cfg.h = 1.0 / 16.0;

  CHECK(cfg.big_m() == doctest::Approx(2.0));
  cfg.lambda = 0.6;
  CHECK(cfg.big_m() == doctest::Approx(10.0));
  cfg.lambda = 1.0;

  const auto rep = weighted_decay_check(cfg, 77);
  CHECK(rep.big_m == doctest::Approx(2.0));
  CHECK(rep.r1 >= 0.0);
  CHECK(rep.r2 >= 0.0);
  CHECK(rep.pass());

  cfg.lambda = 0.4;
  CHECK_THROWS_AS((void)weighted_decay_check(cfg, 1), Error);
  cfg.lambda = 1.0;
  cfg.cube_index = 9;
  CHECK_THROWS_AS((void)weighted_decay_check(cfg, 1), Error);
}

TEST_CASE("interaction decay on a short strip") {
  PerforationSpec spec;
  spec.domain = strip(4.0);
  spec.epsilon = 0.125;
  spec.bc = BoundaryKind::robin({1.0, 0.0});
  MeshPolicy policy;
  const ResolventPair rp(spec, policy);

  const ScalarField one = make_source({.name = "one"});
  const ScalarField zero = make_source({.name = "zero"});

  SUBCASE("zero source gives zero inner product") {
    const auto res = interaction_decay(rp, 0, 2, one, zero);
    CHECK(std::abs(res.inner) <= 1e-14);
    CHECK(res.ratio == 0.0);
  }

  SUBCASE("bound factor e^{-|i-j|/2} enters the denominator") {
    const auto res = interaction_decay(rp, 0, 3, one, one);
    // unit cube up to the indicator quadrature on hole-patch triangles
    CHECK(res.norm_fi == doctest::Approx(1.0).epsilon(5e-3));
    const double expected_ratio =
        std::abs(res.inner) /
        (res.norm_fi * res.norm_fj * std::exp(-3.0 / 2.0));
    CHECK(res.ratio == doctest::Approx(expected_ratio).epsilon(1e-12));
    CHECK(res.ratio > 0.0);
  }

  SUBCASE("same cube rejected") {
    CHECK_THROWS_AS((void)interaction_decay(rp, 1, 1, one, one), Error);
  }
}

TEST_CASE("decomposition inequality report") {
  PerforationSpec spec;
  spec.domain = strip(4.0);
  spec.epsilon = 0.125;
  spec.bc = BoundaryKind::robin({1.0, 0.0});
  const ResolventPair rp(spec, MeshPolicy{});

  const ScalarField one = make_source({.name = "one"});
  SUBCASE("single occupied cube: C <= 1 suffices") {
    const auto rep = decomposition_inequality_check(rp, one, {1}, 3);
    CHECK(rep.n_cubes == 1);
    CHECK(rep.c_min <= 1.0);
    CHECK(rep.lhs == doctest::Approx(rep.sum_norms2).epsilon(1e-12));
  }
  SUBCASE("zero source: both sides vanish") {
    const auto rep = decomposition_inequality_check(
        rp, make_source({.name = "zero"}), {0, 1, 2}, 3);
    CHECK(rep.lhs == 0.0);
    CHECK(rep.c_min == 0.0);
  }
  SUBCASE("n must exceed 1") {
    CHECK_THROWS_AS(
        (void)decomposition_inequality_check(rp, one, {0, 1}, 1), Error);
  }
}
