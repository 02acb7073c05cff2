// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "perfhom/mesh.hpp"

using namespace perfhom;

namespace {

DomainSpec unit_square() {
  DomainSpec d;
  d.dim = 2;
  d.box = {1.0, 1.0};
  return d;
}

PerforationSpec robin_spec(double eps, Complex alpha = {1.0, 0.0}) {
  PerforationSpec s;
  s.domain = unit_square();
  s.epsilon = eps;
  s.bc = BoundaryKind::robin(alpha);
  return s;
}

double mesh_area(const Mesh& m) {
  double area = 0.0;
  for (Index t = 0; t < m.n_triangles(); ++t) area += m.triangle_area(t);
  return area;
}

}  // namespace

TEST_CASE("structured full-domain mesh counts") {
  const Mesh m = mesh_full_domain(unit_square(), 0.5);
  CHECK(m.n_vertices() == 9);
  CHECK(m.n_triangles() == 8);
  CHECK(m.h_max == doctest::Approx(0.5).epsilon(1e-14));
  audit_mesh(m);

  const Mesh m2 = mesh_full_domain(unit_square(), 0.25);
  CHECK(m2.n_triangles() == 32);
  CHECK(mesh_area(m2) == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS((void)mesh_full_domain(unit_square(), 1.0), Error);
  CHECK_THROWS_AS((void)mesh_full_domain(unit_square(), 0.0), Error);
}

TEST_CASE("perforated mesh with one resolvable hole") {
  PerforationSpec spec = robin_spec(0.25);
  spec.radius_override = 1.0 / 16.0;
  const Mesh m = mesh_perforated(spec, 0.125, 1.5);
  REQUIRE(m.holes.size() == 1);
  CHECK(m.holes[0].radius == doctest::Approx(1.0 / 16.0));
  CHECK(m.holes[0].center.x() == doctest::Approx(0.5));

  audit_mesh(m);
  const MeshQualityReport rep = mesh_quality(m);
  CHECK(rep.min_angle_deg >= 20.0);

  // area identity: sum of triangle areas = |Omega| - polygon hole area
  const double hole_area = m.holes[0].area();
  CHECK(mesh_area(m) ==
        doctest::Approx(1.0 - hole_area).epsilon(1e-12));
  // polygon area defect within the configured tolerance
  const double disc = M_PI * m.holes[0].radius * m.holes[0].radius;
  CHECK(disc - hole_area >= 0.0);
  CHECK(disc - hole_area <= 5e-3 * disc);
}

TEST_CASE("perforated mesh rejects unresolvable Dirichlet holes") {
  PerforationSpec spec;
  spec.domain = unit_square();
  spec.epsilon = 0.125;
  spec.bc = BoundaryKind::dirichlet();
  // a = e^{-64} ~ 1.6e-28 < 1e-6 * diam
  CHECK_THROWS_WITH_AS((void)mesh_perforated(spec, 0.125, 1.5),
                       doctest::Contains("unresolvable"), Error);
}

TEST_CASE("perforated mesh without holes equals the full-domain mesh") {
  PerforationSpec spec = robin_spec(0.5 - 1e-9);  // margin excludes all centers
  spec.domain.box = {1.0, 1.0};
  spec.epsilon = 0.45;
  const Mesh a = mesh_perforated(spec, 0.25, 1.5);
  const Mesh b = mesh_full_domain(spec.domain, 0.25);
  CHECK(a.n_vertices() == b.n_vertices());
  CHECK(a.n_triangles() == b.n_triangles());
  CHECK((a.vertices - b.vertices).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.triangles - b.triangles).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("perforated mesh at eps = 1/8 (9 holes) passes the audit") {
  PerforationSpec spec = robin_spec(0.125);
  const Mesh m = mesh_perforated(spec, 0.125, 1.5);
  REQUIRE(m.holes.size() == 9);
  audit_mesh(m);
  double holes_area = 0.0;
  for (const auto& h : m.holes) holes_area += h.area();
  CHECK(mesh_area(m) == doctest::Approx(1.0 - holes_area).epsilon(1e-12));

  const MeshQualityReport rep = mesh_quality(m);
  CHECK(rep.min_angle_deg >= 20.0);
  CHECK(rep.boundary_fit <= 1e-12 * spec.epsilon * spec.epsilon +
                                1e-13);  // ring vertices on their circles
  // graded: adjacent size ratio within the grading bound
  CHECK(rep.max_size_ratio <= 1.5 + 1e-9);
}

TEST_CASE("companion pair: shared vertices and exact plug cover") {
  PerforationSpec spec = robin_spec(0.25);
  const MeshPair pair = mesh_perforated_pair(spec, 0.125, 1.5);
  audit_mesh(pair.perforated);
  audit_mesh(pair.full);

  const Index np = pair.perforated.n_vertices();
  CHECK((pair.full.vertices.topRows(np) - pair.perforated.vertices)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  // plug triangles tile the hole polygons exactly
  double plug_area = 0.0;
  for (int t : pair.plug_triangles) plug_area += pair.full.triangle_area(t);
  double holes_area = 0.0;
  for (const auto& h : pair.perforated.holes) holes_area += h.area();
  CHECK(plug_area == doctest::Approx(holes_area).epsilon(1e-12));
  CHECK(mesh_area(pair.full) == doctest::Approx(1.0).epsilon(1e-12));
  // full mesh has no hole-marked boundary edges
  for (const auto& e : pair.full.boundary_edges) CHECK(e.marker == kOuterMarker);
}

TEST_CASE("radial grids") {
  const RadialGrid u = radial_grid(1.0, 2.0, 2, false);
  REQUIRE(u.n_nodes() == 3);
  CHECK(u.nodes[0] == 1.0);
  CHECK(u.nodes[1] == doctest::Approx(1.5));
  CHECK(u.nodes[2] == 2.0);

  const int n = 37;
  const RadialGrid g = radial_grid(1.0, 100.0, n, true);
  REQUIRE(g.n_nodes() == n + 1);
  const double q = std::pow(100.0, 1.0 / n);
  for (int i = 0; i + 1 < g.n_nodes(); ++i)
    CHECK(g.nodes[i + 1] / g.nodes[i] == doctest::Approx(q).epsilon(1e-12));

  CHECK_THROWS_AS((void)radial_grid(2.0, 1.0, 4, false), Error);
  CHECK_THROWS_AS((void)radial_grid(1.0, 2.0, 1, false), Error);
  CHECK_THROWS_AS((void)radial_grid(0.0, 2.0, 4, true), Error);
}

TEST_CASE("interpolation: identity, affine exactness, zero in holes") {
  const Mesh m = mesh_full_domain(unit_square(), 0.25);
  Vec u(m.n_vertices());
  for (Index v = 0; v < m.n_vertices(); ++v)
    u[v] = Complex(m.vertices(v, 0) * 2.0 - m.vertices(v, 1), m.vertices(v, 1));

  // identical meshes: identity on nodal values
  const Vec same = interpolate(m, u, m);
  CHECK((same - u).cwiseAbs().maxCoeff() <= 1e-14);

  // affine reproduced exactly between nested structured meshes
  const Mesh fine = mesh_full_domain(unit_square(), 0.125);
  Vec uf = interpolate(m, u, fine);
  for (Index v = 0; v < fine.n_vertices(); ++v) {
    const Complex exact(fine.vertices(v, 0) * 2.0 - fine.vertices(v, 1),
                        fine.vertices(v, 1));
    CHECK(std::abs(uf[v] - exact) <= 1e-13);
  }

  // max-norm boundedness
  CHECK(uf.cwiseAbs().maxCoeff() <= u.cwiseAbs().maxCoeff() + 1e-13);

  // a target vertex at a hole center receives 0
  PerforationSpec spec = robin_spec(0.25);
  const MeshPair pair = mesh_perforated_pair(spec, 0.125, 1.5);
  Vec ones = Vec::Ones(pair.perforated.n_vertices());
  const Vec onto_full = interpolate(pair.perforated, ones, pair.full);
  bool found_center = false;
  for (Index v = 0; v < pair.full.n_vertices(); ++v) {
    if ((pair.full.vertices.row(v).transpose() -
         Eigen::Vector2d(0.5, 0.5)).norm() < 1e-14) {
      CHECK(onto_full[v] == Complex(0.0, 0.0));
      found_center = true;
    }
  }
  CHECK(found_center);
}

TEST_CASE("pdmesh round trip") {
  PerforationSpec spec = robin_spec(0.25);
  const Mesh m = mesh_perforated(spec, 0.125, 1.5);
  std::stringstream ss;
  write_pdmesh(ss, m);
  const Mesh r = read_pdmesh(ss);
  CHECK(r.n_vertices() == m.n_vertices());
  CHECK(r.n_triangles() == m.n_triangles());
  CHECK((r.vertices - m.vertices).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.triangles - m.triangles).cwiseAbs().maxCoeff() == 0);
  REQUIRE(r.holes.size() == 1);
  CHECK(r.holes[0].radius == doctest::Approx(m.holes[0].radius).epsilon(1e-12));
  CHECK((r.holes[0].center - m.holes[0].center).norm() <= 1e-12);

  std::stringstream bad("pdmesh 2\n");
  CHECK_THROWS_AS((void)read_pdmesh(bad), Error);
}

TEST_CASE("mesh determinism: identical inputs give identical meshes") {
  PerforationSpec spec = robin_spec(0.125);
  const Mesh a = mesh_perforated(spec, 0.125, 1.5);
  const Mesh b = mesh_perforated(spec, 0.125, 1.5);
  std::stringstream sa, sb;
  write_pdmesh(sa, a);
  write_pdmesh(sb, b);
  CHECK(sa.str() == sb.str());
}
