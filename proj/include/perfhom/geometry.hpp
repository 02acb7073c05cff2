// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "perfhom/types.hpp"

namespace perfhom {

enum class BcKind { Dirichlet, Neumann, Robin };

// Boundary condition tag; alpha is meaningful only for Robin and must satisfy
// alpha != 0, Re(alpha) >= 0.
struct BoundaryKind {
  BcKind kind = BcKind::Dirichlet;
  Complex alpha{0.0, 0.0};

  static BoundaryKind dirichlet() { return {BcKind::Dirichlet, {0, 0}}; }
  static BoundaryKind neumann() { return {BcKind::Neumann, {0, 0}}; }
  static BoundaryKind robin(Complex a) { return {BcKind::Robin, a}; }

  void validate() const;
  const char* name() const;
};

enum class DomainShape { Rectangle, Strip };

// Axis-aligned box [0, box[0]] x ... with d in {2, 3}. Strip tags a domain
// with one long axis used by the decay experiments.
struct DomainSpec {
  int dim = 2;
  std::vector<double> box;  // extents per coordinate, all > 0
  DomainShape shape = DomainShape::Rectangle;

  void validate() const;
  double diameter() const;
  double volume() const;
};

struct PerforationSpec {
  DomainSpec domain;
  double epsilon = 0.25;
  BoundaryKind bc;
  double neumann_exponent = 2.0;             // p > 1, Neumann rule a = eps^p
  std::optional<double> radius_override;     // off-scaling experiments

  void validate() const;
};

// One lattice cell: ball B_a(i) inside B_eps(i) inside the cube of side 2 eps.
struct CellGeometry {
  Vec3 center = Vec3::Zero();
  double hole_radius = 0.0;
  double epsilon = 0.0;
};

struct StrangeTerm {
  Complex mu{0.0, 0.0};
  BoundaryKind iota;
  int dim = 2;
  double surface_area = 0.0;  // S_d of the unit ball
};

enum class Region { Hole, Annulus, Bulk, Outside };

// Radius of the holes under the scaling rule for the given boundary
// condition (or the override). Throws a geometry error when the rule yields
// a >= eps.
double hole_radius(const PerforationSpec& spec);

// Points of 2 eps Z^d at distance > eps from the box boundary, sorted
// lexicographically. The unused third coordinate is zero in 2-D.
std::vector<Vec3> lattice_centers(const DomainSpec& domain, double epsilon);

// Surface area of the unit ball in R^d: S_2 = 2 pi, S_3 = 4 pi,
// S_d = d pi^{d/2} / Gamma(d/2 + 1).
double surface_area_unit_ball(int d);

StrangeTerm strange_term(const BoundaryKind& bc, int d);

// Region classification with boundary ties resolved toward the smaller
// region (hole > annulus > bulk).
Region classify_point(const Vec3& x, const PerforationSpec& spec,
                      const std::vector<Vec3>& centers);

CellGeometry cell_geometry(const Vec3& center, const PerforationSpec& spec);

}  // namespace perfhom
