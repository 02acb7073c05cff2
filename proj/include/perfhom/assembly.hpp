// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "perfhom/geometry.hpp"
#include "perfhom/mesh.hpp"
#include "perfhom/types.hpp"

namespace perfhom {

// Selector for boundary-mass assembly over marked edges.
struct BoundarySelector {
  bool outer_edges = false;
  bool all_holes = false;
  int hole_id = -1;  // >= 0 selects a single hole

  static BoundarySelector outer() { return {true, false, -1}; }
  static BoundarySelector holes() { return {false, true, -1}; }
  static BoundarySelector hole(int id) { return {false, false, id}; }
};

// cosh weight centered at x_0; satisfies w >= 1 and |grad w| <= w.
struct WeightSpec {
  Vec2 center = Vec2::Zero();
  double operator()(const Vec2& x) const { return std::cosh((x - center).norm()); }
};

using ScalarField = std::function<Complex(double, double)>;

// Exact P1 element integrals.
SpMat assemble_stiffness(const Mesh& mesh);
SpMat assemble_mass(const Mesh& mesh);
// Exact 1-D edge mass on the selected marked edges.
SpMat assemble_boundary_mass(const Mesh& mesh, const BoundarySelector& sel);
// Per-triangle 3-midpoint Gauss rule (exact for quadratics, weight sampled).
SpMat assemble_weighted_mass(const Mesh& mesh, const WeightSpec& w);
SpMat assemble_weighted_stiffness(const Mesh& mesh, const WeightSpec& w);
// Load vector of f against the nodal basis, 3-midpoint rule.
Vec assemble_load(const Mesh& mesh, const ScalarField& f);
// Mass restricted to a triangle subset (quadrature over those triangles only).
SpMat assemble_mass_on(const Mesh& mesh, const std::vector<int>& triangles);

bool verify_symmetry(const SpMat& a, Symmetry sym, double tol = 0.0);

// Discrete realization of A_eps (mu = 0, perforated mesh), the limit
// A = -Laplace + (1 + mu) (full mesh), and shifted forms such as B = A - Id
// (shift_c = -1). The composed system is
//   A = K + (shift_c + 1 + mu) M + alpha_hole R_hole + alpha_outer R_outer
// with Dirichlet rows/columns eliminated where the condition is Dirichlet.
struct DiscreteOperator {
  std::shared_ptr<const Mesh> mesh;
  SpMat K, M, R_hole, R_outer;
  BoundaryKind bc, outer_bc;
  Complex shift_c{0.0, 0.0}, mu{0.0, 0.0};
  std::vector<int> dirichlet_nodes;
  std::vector<int> free_nodes;
  SpMat A_full;          // composed, full size, constraints not applied
  SpMat A_red, M_red;    // restricted to free nodes
  Symmetry symmetry = Symmetry::Hermitian;

  Index n() const { return mesh->n_vertices(); }
  Index n_free() const { return static_cast<Index>(free_nodes.size()); }
  Vec to_free(const Vec& full) const;
  Vec from_free(const Vec& red) const;  // zero on constrained nodes
};

DiscreteOperator build_operator(std::shared_ptr<const Mesh> mesh,
                                const BoundaryKind& bc, Complex mu,
                                Complex shift_c,
                                std::optional<BoundaryKind> outer_bc = {});

// Harmonic extension into the holes of a companion pair: values copied on
// shared vertices, discrete Laplace solve with ring trace data inside.
Vec harmonic_extension(const MeshPair& pair, const Vec& u_perf);

// Measured constant C with ||T u||^2_{K, plug(i)} <= C ||u||^2_{K+M, cell(i)},
// maximized over holes; logged, not asserted.
double extension_energy_constant(const MeshPair& pair, const Vec& u_perf);

// ( ||u_perf - Pi u_full||^2_{L２(Omega_eps)} + ||u_full||^2_{L2(T_eps)} )^{1/2}
// with Pi = interpolate; the second term integrates over the perforated
// mesh's hole polygons by clipping full-mesh triangles.
double l2_defect(const Mesh& perf, const Vec& u_perf, const Mesh& full,
                 const Vec& u_full);

// || u ||_{L2(T_eps)} for a nodal field on the full companion mesh.
double holes_l2_norm(const Mesh& full, const Vec& u_full,
                     const std::vector<HolePolygon>& holes);

// max over seeded random H1-normalized nodal fields f of ||f||_{L2(T_eps)}.
double ji_defect_estimate(const MeshPair& pair, int n_samples,
                          std::uint64_t seed);

// Coordinate text export: "row col re im" per nonzero.
void export_matrix_coord(std::ostream& os, const SpMat& a);

// Mass-weighted norms/inner products (Riesz form of the L2 pairing).
double mass_norm(const SpMat& mass, const Vec& u);
Complex mass_inner(const SpMat& mass, const Vec& u, const Vec& v);

}  // namespace perfhom
