// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "perfhom/mesh.hpp"

namespace perfhom {

void write_pdmesh(std::ostream& os, const Mesh& mesh) {
  os << "pdmesh 1\n";
  os << mesh.n_vertices() << "\n";
  char buf[96];
  for (Index v = 0; v < mesh.n_vertices(); ++v) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", mesh.vertices(v, 0),
                  mesh.vertices(v, 1));
    os << buf;
  }
  os << mesh.n_triangles() << "\n";
  for (Index t = 0; t < mesh.n_triangles(); ++t)
    os << mesh.triangles(t, 0) << " " << mesh.triangles(t, 1) << " "
       << mesh.triangles(t, 2) << "\n";
  os << mesh.boundary_edges.size() << "\n";
  for (const auto& e : mesh.boundary_edges) {
    os << e.v0 << " " << e.v1 << " ";
    if (e.marker == kOuterMarker)
      os << "outer\n";
    else
      os << "hole " << e.marker << "\n";
  }
}

void write_pdmesh_file(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os)
    throw_error(Error::Code::Resource, "cannot open " + path + " for writing");
  write_pdmesh(os, mesh);
}

namespace {

// Reassemble each hole polygon from its marked boundary edges: walk the edge
// loop, orient counterclockwise, and fit center/radius from the ring.
void rebuild_holes(Mesh& mesh) {
  std::map<int, std::vector<std::pair<int, int>>> per_hole;
  for (const auto& e : mesh.boundary_edges)
    if (e.marker != kOuterMarker) per_hole[e.marker].push_back({e.v0, e.v1});

  for (auto& [id, edges] : per_hole) {
    std::map<int, std::vector<int>> adj;
    for (auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<int> loop;
    int start = edges.front().first;
    int prev = -1, cur = start;
    do {
      loop.push_back(cur);
      const auto& nb = adj[cur];
      if (nb.size() != 2)
        throw_error(Error::Code::Mesh, "hole boundary is not a closed loop");
      const int nxt = (nb[0] == prev) ? nb[1] : nb[0];
      prev = cur;
      cur = nxt;
    } while (cur != start && loop.size() <= edges.size());
    if (cur != start)
      throw_error(Error::Code::Mesh, "hole boundary is not a closed loop");

    double a2 = 0.0;
    for (size_t i = 0; i < loop.size(); ++i) {
      const size_t j = (i + 1) % loop.size();
      a2 += mesh.vertices(loop[i], 0) * mesh.vertices(loop[j], 1) -
            mesh.vertices(loop[j], 0) * mesh.vertices(loop[i], 1);
    }
    if (a2 < 0.0) std::reverse(loop.begin(), loop.end());  // store rings CCW

    HolePolygon hole;
    hole.ring.resize(static_cast<Index>(loop.size()), 2);
    Vec2 c = Vec2::Zero();
    for (size_t i = 0; i < loop.size(); ++i) {
      hole.ring.row(static_cast<Index>(i)) = mesh.vertices.row(loop[i]);
      c += mesh.vertices.row(loop[i]).transpose();
    }
    c /= static_cast<double>(loop.size());
    hole.center = c;
    double r = 0.0;
    for (size_t i = 0; i < loop.size(); ++i)
      r += (mesh.vertices.row(loop[i]).transpose() - c).norm();
    hole.radius = r / static_cast<double>(loop.size());
    mesh.holes.push_back(std::move(hole));
  }
}

}  // namespace

Mesh read_pdmesh(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "pdmesh" || version != 1)
    throw_error(Error::Code::Validation, "not a pdmesh 1 file");
  Mesh mesh;
  Index nv = 0;
  is >> nv;
  if (!is || nv <= 0) throw_error(Error::Code::Validation, "bad vertex count");
  mesh.vertices.resize(nv, 2);
  for (Index v = 0; v < nv; ++v) is >> mesh.vertices(v, 0) >> mesh.vertices(v, 1);
  Index nt = 0;
  is >> nt;
  if (!is || nt <= 0) throw_error(Error::Code::Validation, "bad triangle count");
  mesh.triangles.resize(nt, 3);
  for (Index t = 0; t < nt; ++t)
    is >> mesh.triangles(t, 0) >> mesh.triangles(t, 1) >> mesh.triangles(t, 2);
  size_t nb = 0;
  is >> nb;
  for (size_t e = 0; e < nb; ++e) {
    BoundaryEdge be;
    std::string kind;
    is >> be.v0 >> be.v1 >> kind;
    if (kind == "outer") {
      be.marker = kOuterMarker;
    } else if (kind == "hole") {
      is >> be.marker;
    } else {
      throw_error(Error::Code::Validation, "unknown boundary marker " + kind);
    }
    mesh.boundary_edges.push_back(be);
  }
  if (!is) throw_error(Error::Code::Validation, "truncated pdmesh file");
  for (Index t = 0; t < nt; ++t)
    for (int k = 0; k < 3; ++k)
      if (mesh.triangles(t, k) < 0 || mesh.triangles(t, k) >= nv)
        throw_error(Error::Code::Validation, "triangle index out of range");

  rebuild_holes(mesh);
  mesh.h_max = 0.0;
  mesh.h_min = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < nt; ++t) {
    const double s = std::sqrt(2.0 * std::abs(mesh.triangle_area(t)));
    mesh.h_max = std::max(mesh.h_max, s);
    mesh.h_min = std::min(mesh.h_min, s);
  }
  return mesh;
}

Mesh read_pdmesh_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw_error(Error::Code::Resource, "cannot open " + path);
  return read_pdmesh(is);
}

}  // namespace perfhom
