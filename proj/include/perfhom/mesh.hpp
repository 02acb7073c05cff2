// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "perfhom/geometry.hpp"
#include "perfhom/types.hpp"

namespace perfhom {

// Boundary edge marker: -1 for the outer boundary, >= 0 for hole ids.
constexpr int kOuterMarker = -1;

struct BoundaryEdge {
  int v0 = 0, v1 = 0;
  int marker = kOuterMarker;
};

// Convex polygon describing one meshed hole (ring vertices in CCW order).
struct HolePolygon {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  Eigen::Matrix<double, Eigen::Dynamic, 2> ring;  // n_seg x 2 coordinates
  double area() const;
};

// Conforming 2-D triangulation. Triangles are CCW vertex-index triples.
// h_max/h_min record the element size measure sqrt(2*area), which equals the
// grid spacing for background triangles obtained by splitting squares.
struct Mesh {
  Eigen::Matrix<double, Eigen::Dynamic, 2> vertices;
  Eigen::Matrix<int, Eigen::Dynamic, 3> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<HolePolygon> holes;
  double h_max = 0.0, h_min = 0.0;

  Index n_vertices() const { return vertices.rows(); }
  Index n_triangles() const { return triangles.rows(); }
  double triangle_area(Index t) const;
  // Vertex index sets on marked boundaries.
  std::vector<int> boundary_vertices(bool outer, bool holes) const;
};

struct RadialGrid {
  RealVec nodes;  // strictly increasing radii
  Index n_nodes() const { return nodes.size(); }
};

struct MeshQualityReport {
  double min_angle_deg = 0.0;
  double max_aspect = 0.0;      // longest edge / (2 * inradius)
  double boundary_fit = 0.0;    // max distance of hole ring vertices to circles
  double max_size_ratio = 1.0;  // max adjacent element size ratio
  Index n_vertices = 0, n_triangles = 0, n_boundary_edges = 0;
  std::string to_string() const;
};

struct MeshOptions {
  double tol_rel = 5e-3;          // hole polygon area defect tolerance
  double resolve_floor = 1e-6;    // holes below resolve_floor * diam are rejected
  double min_angle_deg = 20.0;    // audited lower bound
  Index max_triangles = 4'000'000;
};

// Structured triangulation of the box; h is the target grid spacing and each
// grid square is split into two triangles.
Mesh mesh_full_domain(const DomainSpec& domain, double h,
                      const MeshOptions& opt = {});

// Perforated mesh of Omega \ T_eps: background grid plus one graded O-grid
// patch per hole cell. grading in (1, 2].
Mesh mesh_perforated(const PerforationSpec& spec, double h_far, double grading,
                     const MeshOptions& opt = {});

// Companion pair: full.vertices.topRows(n_perf) coincide with the perforated
// mesh vertices (same ids); holes are filled with plug patches whose vertex
// ids start at n_perf.
struct MeshPair {
  Mesh perforated;
  Mesh full;
  std::vector<int> plug_vertices;   // full-mesh vertex ids strictly inside holes
  std::vector<int> plug_triangles;  // full-mesh triangle ids covering the holes
};

MeshPair mesh_perforated_pair(const PerforationSpec& spec, double h_far,
                              double grading, const MeshOptions& opt = {});

// n+1 radii from r_in to r_out, geometric (constant ratio) or uniform.
RadialGrid radial_grid(double r_in, double r_out, int n, bool geometric);

// P1 interpolation of nodal values from src onto the vertices of dst;
// vertices outside the source domain (e.g. inside holes) get 0.
Vec interpolate(const Mesh& src, const Vec& u, const Mesh& dst);

MeshQualityReport mesh_quality(const Mesh& mesh);

// Full conformity/orientation/quality audit; throws a mesh error with the
// report attached to the message on violation.
void audit_mesh(const Mesh& mesh, const MeshOptions& opt = {});

// Plain-text mesh format "pdmesh 1".
void write_pdmesh(std::ostream& os, const Mesh& mesh);
void write_pdmesh_file(const std::string& path, const Mesh& mesh);
Mesh read_pdmesh(std::istream& is);
Mesh read_pdmesh_file(const std::string& path);

}  // namespace perfhom
