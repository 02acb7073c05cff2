// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include "perfhom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace perfhom {

namespace {

constexpr double kPi = 3.14159265358979323846;

double tri_area(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
  return 0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) -
                (p2.x() - p0.x()) * (p1.y() - p0.y()));
}

double tri_size(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
  return std::sqrt(2.0 * std::abs(tri_area(p0, p1, p2)));
}

struct MeshBuilder {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<HolePolygon> holes;

  int add_vertex(const Vec2& p) {
    vertices.push_back(p);
    return static_cast<int>(vertices.size()) - 1;
  }
  void add_triangle(int a, int b, int c) { triangles.push_back({a, b, c}); }
  // Split the quad (A,B,C,D) in CCW order along its shorter diagonal.
  void add_quad(int a, int b, int c, int d) {
    const double ac = (vertices[a] - vertices[c]).squaredNorm();
    const double bd = (vertices[b] - vertices[d]).squaredNorm();
    if (ac <= bd) {
      add_triangle(a, b, c);
      add_triangle(a, c, d);
    } else {
      add_triangle(a, b, d);
      add_triangle(b, c, d);
    }
  }

  Mesh finish(bool canonical) {
    Mesh m;
    const int nv = static_cast<int>(vertices.size());
    std::vector<int> perm(nv);
    std::iota(perm.begin(), perm.end(), 0);
    if (canonical) {
      std::sort(perm.begin(), perm.end(), [&](int i, int j) {
        if (vertices[i].x() != vertices[j].x())
          return vertices[i].x() < vertices[j].x();
        return vertices[i].y() < vertices[j].y();
      });
    }
    std::vector<int> inv(nv);
    for (int k = 0; k < nv; ++k) inv[perm[k]] = k;

    m.vertices.resize(nv, 2);
    for (int k = 0; k < nv; ++k) m.vertices.row(k) = vertices[perm[k]].transpose();

    m.triangles.resize(static_cast<Index>(triangles.size()), 3);
    for (size_t t = 0; t < triangles.size(); ++t) {
      std::array<int, 3> tri = {inv[triangles[t][0]], inv[triangles[t][1]],
                                inv[triangles[t][2]]};
      // rotate so the smallest index comes first, preserving orientation
      int s = 0;
      if (tri[1] < tri[s]) s = 1;
      if (tri[2] < tri[s]) s = 2;
      m.triangles(static_cast<Index>(t), 0) = tri[s];
      m.triangles(static_cast<Index>(t), 1) = tri[(s + 1) % 3];
      m.triangles(static_cast<Index>(t), 2) = tri[(s + 2) % 3];
    }
    if (canonical) {
      std::vector<int> order(triangles.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int i, int j) {
        for (int k = 0; k < 3; ++k) {
          if (m.triangles(i, k) != m.triangles(j, k))
            return m.triangles(i, k) < m.triangles(j, k);
        }
        return false;
      });
      Eigen::Matrix<int, Eigen::Dynamic, 3> sorted(m.triangles.rows(), 3);
      for (size_t k = 0; k < order.size(); ++k)
        sorted.row(static_cast<Index>(k)) = m.triangles.row(order[k]);
      m.triangles = sorted;
    }

    m.boundary_edges = boundary_edges;
    for (auto& e : m.boundary_edges) {
      e.v0 = inv[e.v0];
      e.v1 = inv[e.v1];
      if (e.v0 > e.v1) std::swap(e.v0, e.v1);
    }
    std::sort(m.boundary_edges.begin(), m.boundary_edges.end(),
              [](const BoundaryEdge& a, const BoundaryEdge& b) {
                if (a.v0 != b.v0) return a.v0 < b.v0;
                if (a.v1 != b.v1) return a.v1 < b.v1;
                return a.marker < b.marker;
              });
    m.holes = holes;

    m.h_max = 0.0;
    m.h_min = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < m.triangles.rows(); ++t) {
      const double s = tri_size(m.vertices.row(m.triangles(t, 0)).transpose(),
                                m.vertices.row(m.triangles(t, 1)).transpose(),
                                m.vertices.row(m.triangles(t, 2)).transpose());
      m.h_max = std::max(m.h_max, s);
      m.h_min = std::min(m.h_min, s);
    }
    return m;
  }
};

// Radii a = r_0 < ... < r_P = H, growing by at most `grading` per step and
// capped by beta * (local ring circumference / n_seg) so ring quads keep a
// bounded aspect ratio.
std::vector<double> radial_sequence(double a, double H, double grading,
                                    int n_seg, double beta) {
  const double tang0 = 2.0 * kPi * a / n_seg;
  double delta = std::min(a / 4.0, beta * tang0);
  delta = std::min(delta, H - a);
  std::vector<double> seq{a};
  double r = a;
  while (r + delta < H) {
    r += delta;
    seq.push_back(r);
    delta = std::min(grading * delta, beta * 2.0 * kPi * r / n_seg);
  }
  const double rem = H - seq.back();
  if (seq.size() == 1) {
    seq.push_back(H);
  } else {
    const double last = seq.back() - seq[seq.size() - 2];
    if (rem >= last / grading) {
      seq.push_back(H);
    } else {
      // Redistribute the tail over two equal steps to avoid a sliver layer.
      const double base = seq[seq.size() - 2];
      seq.back() = 0.5 * (base + H);
      seq.push_back(H);
    }
  }
  return seq;
}

// Smallest polygon segment count whose inscribed-regular-n-gon area defect
// stays within tol_rel * (pi a^2), with the spec floor applied.
int required_segments(double tol_rel) {
  int n = std::max(16, static_cast<int>(std::ceil(
                           2.0 * kPi / std::sqrt(8.0 * tol_rel))));
  auto defect_ok = [&](int k) {
    const double poly = 0.5 * k * std::sin(2.0 * kPi / k);
    return (kPi - poly) <= tol_rel * kPi;
  };
  while (!defect_ok(n)) ++n;
  return n;
}

struct GridFrame {
  double sx = 0.0, sy = 0.0;  // equal spacing s in both axes
  long nx = 0, ny = 0;
  double s = 0.0;
};

long checked_divisions(double extent, double s) {
  const double q = extent / s;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9 * std::max(1.0, q) || r < 1.0) return -1;
  return static_cast<long>(r);
}

struct PatchSpec {
  Vec2 center;
  long gx = 0, gy = 0;  // grid index of the center
  int half = 0;         // cell half-width in grid units (m)
};

struct GridNodes {
  const GridFrame* frame;
  MeshBuilder* builder;
  std::unordered_map<long long, int> ids;

  int get(long ix, long iy) {
    const long long key = ix * (frame->ny + 1) + iy;
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    const int id = builder->add_vertex(Vec2(ix * frame->s, iy * frame->s));
    ids.emplace(key, id);
    return id;
  }
};

// O-grid annulus between the circle of radius `a` and the cell square of
// half-width `H`, morphing uniform hole angles into the square-boundary
// parameterization. Returns the hole ring (CCW vertex ids, layer 0).
std::vector<int> build_patch_annulus(MeshBuilder& b, GridNodes& nodes,
                                     const PatchSpec& patch, double a,
                                     double grading, double beta) {
  const double s = nodes.frame->s;
  const double H = patch.half * s;
  const int m = patch.half;
  const int n = 8 * m;

  // Cell boundary nodes CCW, starting at the lower-left corner.
  std::vector<int> boundary(n);
  std::vector<Vec2> bpos(n);
  int k = 0;
  for (int i = 0; i < 2 * m; ++i, ++k)
    boundary[k] = nodes.get(patch.gx - m + i, patch.gy - m);
  for (int i = 0; i < 2 * m; ++i, ++k)
    boundary[k] = nodes.get(patch.gx + m, patch.gy - m + i);
  for (int i = 0; i < 2 * m; ++i, ++k)
    boundary[k] = nodes.get(patch.gx + m - i, patch.gy + m);
  for (int i = 0; i < 2 * m; ++i, ++k)
    boundary[k] = nodes.get(patch.gx - m, patch.gy + m - i);
  for (int i = 0; i < n; ++i) bpos[i] = b.vertices[boundary[i]];

  // Unwrapped square-boundary angles (increasing, starting at -3 pi / 4).
  std::vector<double> theta_sq(n), theta_un(n);
  double prev = -0.75 * kPi;
  for (int i = 0; i < n; ++i) {
    double th = std::atan2(bpos[i].y() - patch.center.y(),
                           bpos[i].x() - patch.center.x());
    while (th < prev - 1e-12) th += 2.0 * kPi;
    theta_sq[i] = th;
    prev = th;
    theta_un[i] = -0.75 * kPi + 2.0 * kPi * i / n;
  }

  const std::vector<double> radii = radial_sequence(a, H, grading, n, beta);
  const int layers = static_cast<int>(radii.size());

  // layer 0 = hole circle, layer layers-1 = cell boundary (existing nodes)
  std::vector<std::vector<int>> ring(layers, std::vector<int>(n));
  ring[layers - 1] = boundary;
  for (int j = 0; j < layers - 1; ++j) {
    const double tau = (radii[j] - a) / (H - a);
    for (int i = 0; i < n; ++i) {
      const double phi = theta_un[i] + tau * (theta_sq[i] - theta_un[i]);
      const double c = std::cos(phi), sn = std::sin(phi);
      const double len = H / std::max(std::abs(c), std::abs(sn));
      const double rho = (j == 0) ? a : a + tau * (len - a);
      ring[j][i] = b.add_vertex(patch.center + rho * Vec2(c, sn));
    }
  }

  for (int j = 0; j + 1 < layers; ++j)
    for (int i = 0; i < n; ++i) {
      const int i1 = (i + 1) % n;
      b.add_quad(ring[j][i], ring[j + 1][i], ring[j + 1][i1], ring[j][i1]);
    }
  return ring[0];
}

// Disk plug inside a hole ring: coarsening transition rings (node count
// halves per ring while the radius shrinks to keep the aspect bounded),
// finished by a fan around the center.
std::vector<int> build_plug(MeshBuilder& b, const Vec2& center, double a,
                            const std::vector<int>& hole_ring) {
  std::vector<int> added;
  std::vector<int> ring = hole_ring;
  int n = static_cast<int>(ring.size());
  double r = a;
  std::vector<double> angle(n);
  for (int i = 0; i < n; ++i) {
    const Vec2 d = b.vertices[ring[i]] - center;
    angle[i] = std::atan2(d.y(), d.x());
  }
  while (n > 12 && n % 2 == 0) {
    const int n2 = n / 2;
    const double r2 = r * std::max(0.3, 1.0 - 2.0 * kPi / n);
    std::vector<int> inner(n2);
    std::vector<double> inner_angle(n2);
    for (int j = 0; j < n2; ++j) {
      inner_angle[j] = angle[2 * j];
      const int id = b.add_vertex(
          center + r2 * Vec2(std::cos(inner_angle[j]), std::sin(inner_angle[j])));
      inner[j] = id;
      added.push_back(id);
    }
    for (int j = 0; j < n2; ++j) {
      const int j1 = (j + 1) % n2;
      const int o0 = ring[2 * j], o1 = ring[2 * j + 1], o2 = ring[(2 * j + 2) % n];
      b.add_triangle(inner[j], o0, o1);
      b.add_triangle(inner[j], o1, inner[j1]);
      b.add_triangle(inner[j1], o1, o2);
    }
    ring = std::move(inner);
    angle = std::move(inner_angle);
    n = n2;
    r = r2;
  }
  const int c = b.add_vertex(center);
  added.push_back(c);
  for (int i = 0; i < n; ++i) b.add_triangle(c, ring[i], ring[(i + 1) % n]);
  return added;
}

struct PerforatedBuild {
  MeshBuilder builder;
  std::vector<std::vector<int>> hole_rings;
  Index check_triangles = 0;
};

PerforatedBuild build_perforated(const PerforationSpec& spec, double h_far,
                                 double grading, const MeshOptions& opt) {
  spec.validate();
  if (spec.domain.dim != 2)
    throw_error(Error::Code::Argument, "triangulation is 2-D only");
  if (!(grading > 1.0 && grading <= 2.0))
    throw_error(Error::Code::Argument, "grading must lie in (1, 2]");
  if (!(h_far > 0.0))
    throw_error(Error::Code::Argument, "h_far must be positive");

  const double eps = spec.epsilon;
  const double a = hole_radius(spec);
  if (a < opt.resolve_floor * spec.domain.diameter())
    throw_error(Error::Code::Geometry,
                "unresolvable hole: a = " + std::to_string(a) + " at eps = " +
                    std::to_string(eps) + " is below the resolvability floor");
  if (a > 0.9 * eps)
    throw_error(Error::Code::Geometry,
                "hole radius too close to the cell radius for ring meshing");

  const int n_req = required_segments(opt.tol_rel);
  int m = std::max<int>(static_cast<int>(std::ceil(eps / h_far)),
                        (n_req + 7) / 8);

  // Background pitch s = eps/m must divide the box extents.
  long nx = -1, ny = -1;
  double s = 0.0;
  const int m0 = m;
  for (; m <= 8 * m0; ++m) {
    s = eps / m;
    nx = checked_divisions(spec.domain.box[0], s);
    ny = checked_divisions(spec.domain.box[1], s);
    if (nx > 0 && ny > 0) break;
  }
  if (nx <= 0 || ny <= 0)
    throw_error(Error::Code::Mesh,
                "box extents are incommensurate with the lattice pitch");

  GridFrame frame;
  frame.s = s;
  frame.nx = nx;
  frame.ny = ny;

  const std::vector<Vec3> centers = lattice_centers(spec.domain, eps);

  PerforatedBuild out;
  MeshBuilder& b = out.builder;
  GridNodes nodes{&frame, &b, {}};

  std::vector<PatchSpec> patches;
  std::unordered_set<long long> covered;  // grid squares inside hole cells
  patches.reserve(centers.size());
  for (const Vec3& c : centers) {
    PatchSpec p;
    p.center = Vec2(c.x(), c.y());
    p.gx = std::lround(c.x() / s);
    p.gy = std::lround(c.y() / s);
    if (std::abs(p.gx * s - c.x()) > 1e-9 * eps ||
        std::abs(p.gy * s - c.y()) > 1e-9 * eps)
      throw_error(Error::Code::Mesh, "lattice center off the background grid");
    p.half = m;
    for (long ix = p.gx - m; ix < p.gx + m; ++ix)
      for (long iy = p.gy - m; iy < p.gy + m; ++iy)
        covered.insert(ix * frame.ny + iy);
    patches.push_back(p);
  }

  const Index est = 2 * nx * ny + static_cast<Index>(patches.size()) * 8 * m * 40;
  if (est > opt.max_triangles)
    throw_error(Error::Code::Resource, "estimated element count exceeds the cap");

  // Background squares outside the hole cells.
  for (long ix = 0; ix < nx; ++ix)
    for (long iy = 0; iy < ny; ++iy) {
      if (covered.count(ix * frame.ny + iy)) continue;
      const int v00 = nodes.get(ix, iy), v10 = nodes.get(ix + 1, iy);
      const int v11 = nodes.get(ix + 1, iy + 1), v01 = nodes.get(ix, iy + 1);
      b.add_triangle(v00, v10, v11);
      b.add_triangle(v00, v11, v01);
      if (iy == 0) b.boundary_edges.push_back({v00, v10, kOuterMarker});
      if (iy == ny - 1) b.boundary_edges.push_back({v01, v11, kOuterMarker});
      if (ix == 0) b.boundary_edges.push_back({v00, v01, kOuterMarker});
      if (ix == nx - 1) b.boundary_edges.push_back({v10, v11, kOuterMarker});
    }

  const double beta = 1.7;  // radial/tangential aspect cap in ring layers
  for (size_t h = 0; h < patches.size(); ++h) {
    std::vector<int> ring =
        build_patch_annulus(b, nodes, patches[h], a, grading, beta);
    HolePolygon poly;
    poly.center = patches[h].center;
    poly.radius = a;
    poly.ring.resize(static_cast<Index>(ring.size()), 2);
    for (size_t i = 0; i < ring.size(); ++i) {
      poly.ring.row(static_cast<Index>(i)) = b.vertices[ring[i]].transpose();
      b.boundary_edges.push_back(
          {ring[i], ring[(i + 1) % ring.size()], static_cast<int>(h)});
    }
    b.holes.push_back(std::move(poly));
    out.hole_rings.push_back(std::move(ring));
  }
  return out;
}

}  // namespace

double HolePolygon::area() const {
  double a2 = 0.0;
  const Index n = ring.rows();
  for (Index i = 0; i < n; ++i) {
    const Index j = (i + 1) % n;
    a2 += ring(i, 0) * ring(j, 1) - ring(j, 0) * ring(i, 1);
  }
  return 0.5 * std::abs(a2);
}

double Mesh::triangle_area(Index t) const {
  return tri_area(vertices.row(triangles(t, 0)).transpose(),
                  vertices.row(triangles(t, 1)).transpose(),
                  vertices.row(triangles(t, 2)).transpose());
}

std::vector<int> Mesh::boundary_vertices(bool outer, bool hole_b) const {
  std::vector<char> mark(n_vertices(), 0);
  for (const auto& e : boundary_edges) {
    const bool is_outer = e.marker == kOuterMarker;
    if ((is_outer && outer) || (!is_outer && hole_b)) {
      mark[e.v0] = 1;
      mark[e.v1] = 1;
    }
  }
  std::vector<int> out;
  for (Index v = 0; v < n_vertices(); ++v)
    if (mark[v]) out.push_back(static_cast<int>(v));
  return out;
}

Mesh mesh_full_domain(const DomainSpec& domain, double h,
                      const MeshOptions& opt) {
  domain.validate();
  if (domain.dim != 2)
    throw_error(Error::Code::Argument, "triangulation is 2-D only");
  const double min_ext = *std::min_element(domain.box.begin(), domain.box.end());
  if (!(h > 0.0) || h > 0.5 * min_ext)
    throw_error(Error::Code::Argument,
                "grid spacing h must satisfy 0 < h <= min extent / 2");

  const long nx = static_cast<long>(std::ceil(domain.box[0] / h - 1e-12));
  const long ny = static_cast<long>(std::ceil(domain.box[1] / h - 1e-12));
  if (2 * nx * ny > opt.max_triangles)
    throw_error(Error::Code::Resource, "element count exceeds the cap");
  const double sx = domain.box[0] / nx, sy = domain.box[1] / ny;

  MeshBuilder b;
  auto vid = [&](long ix, long iy) { return static_cast<int>(ix * (ny + 1) + iy); };
  for (long ix = 0; ix <= nx; ++ix)
    for (long iy = 0; iy <= ny; ++iy) b.add_vertex(Vec2(ix * sx, iy * sy));
  for (long ix = 0; ix < nx; ++ix)
    for (long iy = 0; iy < ny; ++iy) {
      const int v00 = vid(ix, iy), v10 = vid(ix + 1, iy);
      const int v11 = vid(ix + 1, iy + 1), v01 = vid(ix, iy + 1);
      b.add_triangle(v00, v10, v11);
      b.add_triangle(v00, v11, v01);
      if (iy == 0) b.boundary_edges.push_back({v00, v10, kOuterMarker});
      if (iy == ny - 1) b.boundary_edges.push_back({v01, v11, kOuterMarker});
      if (ix == 0) b.boundary_edges.push_back({v00, v01, kOuterMarker});
      if (ix == nx - 1) b.boundary_edges.push_back({v10, v11, kOuterMarker});
    }
  return b.finish(true);
}

Mesh mesh_perforated(const PerforationSpec& spec, double h_far, double grading,
                     const MeshOptions& opt) {
  if (spec.domain.dim == 2 && lattice_centers(spec.domain, spec.epsilon).empty())
    return mesh_full_domain(spec.domain, h_far, opt);
  PerforatedBuild pb = build_perforated(spec, h_far, grading, opt);
  return pb.builder.finish(true);
}

MeshPair mesh_perforated_pair(const PerforationSpec& spec, double h_far,
                              double grading, const MeshOptions& opt) {
  MeshPair pair;
  const std::vector<Vec3> centers = lattice_centers(spec.domain, spec.epsilon);
  if (spec.domain.dim == 2 && centers.empty()) {
    pair.perforated = mesh_full_domain(spec.domain, h_far, opt);
    pair.full = pair.perforated;
    return pair;
  }

  PerforatedBuild pb = build_perforated(spec, h_far, grading, opt);
  // Canonicalize the shared (perforated) part once; the full mesh reuses the
  // same vertex order and appends plug vertices after it.
  MeshBuilder& b = pb.builder;
  const int n_perf = static_cast<int>(b.vertices.size());
  std::vector<int> perm(n_perf);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int i, int j) {
    if (b.vertices[i].x() != b.vertices[j].x())
      return b.vertices[i].x() < b.vertices[j].x();
    return b.vertices[i].y() < b.vertices[j].y();
  });
  std::vector<int> inv(n_perf);
  for (int k = 0; k < n_perf; ++k) inv[perm[k]] = k;

  MeshBuilder canon;
  canon.vertices.reserve(b.vertices.size());
  for (int k = 0; k < n_perf; ++k) canon.vertices.push_back(b.vertices[perm[k]]);
  for (const auto& t : b.triangles)
    canon.add_triangle(inv[t[0]], inv[t[1]], inv[t[2]]);
  for (const auto& e : b.boundary_edges)
    canon.boundary_edges.push_back({inv[e.v0], inv[e.v1], e.marker});
  canon.holes = b.holes;
  for (auto& ring : pb.hole_rings)
    for (auto& v : ring) v = inv[v];

  pair.perforated = canon.finish(false);

  // Full companion: same vertices/triangles plus plugs; hole boundary edges
  // are dropped (the holes are filled), hole polygons kept for clipping.
  MeshBuilder full = canon;
  full.boundary_edges.clear();
  for (const auto& e : canon.boundary_edges)
    if (e.marker == kOuterMarker) full.boundary_edges.push_back(e);
  const Index tri_perf = static_cast<Index>(full.triangles.size());
  for (size_t h = 0; h < pb.hole_rings.size(); ++h) {
    const Vec2 c = canon.holes[h].center;
    std::vector<int> added =
        build_plug(full, c, canon.holes[h].radius, pb.hole_rings[h]);
    for (int v : added) pair.plug_vertices.push_back(v);
  }
  for (Index t = tri_perf; t < static_cast<Index>(full.triangles.size()); ++t)
    pair.plug_triangles.push_back(static_cast<int>(t));
  pair.full = full.finish(false);
  return pair;
}

RadialGrid radial_grid(double r_in, double r_out, int n, bool geometric) {
  if (!(r_in >= 0.0) || !(r_in < r_out) || n < 2)
    throw_error(Error::Code::Argument,
                "radial grid requires 0 <= r_in < r_out and n >= 2");
  if (geometric && !(r_in > 0.0))
    throw_error(Error::Code::Argument, "geometric grid requires r_in > 0");
  RadialGrid g;
  g.nodes.resize(n + 1);
  if (geometric) {
    const double q = std::pow(r_out / r_in, 1.0 / n);
    double r = r_in;
    for (int i = 0; i <= n; ++i, r *= q) g.nodes[i] = r;
    g.nodes[n] = r_out;
  } else {
    for (int i = 0; i <= n; ++i)
      g.nodes[i] = r_in + (r_out - r_in) * double(i) / n;
  }
  return g;
}

namespace {

struct TriLocator {
  const Mesh* mesh;
  double x0, y0, bs;
  long bx, by;
  std::vector<std::vector<int>> bins;

  explicit TriLocator(const Mesh& m) : mesh(&m) {
    const auto& V = m.vertices;
    x0 = V.col(0).minCoeff();
    y0 = V.col(1).minCoeff();
    const double x1 = V.col(0).maxCoeff(), y1 = V.col(1).maxCoeff();
    const long target = std::max<long>(1, static_cast<long>(
        std::sqrt(static_cast<double>(m.n_triangles()))));
    bx = std::max<long>(1, target);
    by = std::max<long>(1, target);
    bs = std::max((x1 - x0) / bx, (y1 - y0) / by);
    if (!(bs > 0.0)) bs = 1.0;
    bx = static_cast<long>(std::ceil((x1 - x0) / bs)) + 1;
    by = static_cast<long>(std::ceil((y1 - y0) / bs)) + 1;
    bins.assign(static_cast<size_t>(bx * by), {});
    for (Index t = 0; t < m.n_triangles(); ++t) {
      double tx0 = 1e300, ty0 = 1e300, tx1 = -1e300, ty1 = -1e300;
      for (int k = 0; k < 3; ++k) {
        const auto p = V.row(m.triangles(t, k));
        tx0 = std::min(tx0, p(0));
        tx1 = std::max(tx1, p(0));
        ty0 = std::min(ty0, p(1));
        ty1 = std::max(ty1, p(1));
      }
      const long ix0 = clampi((tx0 - x0) / bs), ix1 = clampi((tx1 - x0) / bs, bx - 1);
      const long iy0 = clampi((ty0 - y0) / bs), iy1 = clampi((ty1 - y0) / bs, by - 1);
      for (long ix = ix0; ix <= ix1; ++ix)
        for (long iy = iy0; iy <= iy1; ++iy)
          bins[static_cast<size_t>(ix * by + iy)].push_back(static_cast<int>(t));
    }
  }

  static long clampi(double v, long hi = std::numeric_limits<long>::max()) {
    long i = static_cast<long>(std::floor(v));
    if (i < 0) i = 0;
    if (i > hi) i = hi;
    return i;
  }

  // Triangle containing p, with barycentric coordinates; -1 when outside.
  int locate(const Vec2& p, Eigen::Vector3d& bary) const {
    const long ix = std::min<long>(bx - 1, clampi((p.x() - x0) / bs));
    const long iy = std::min<long>(by - 1, clampi((p.y() - y0) / bs));
    const auto& cand = bins[static_cast<size_t>(ix * by + iy)];
    constexpr double tol = -1e-10;
    for (int t : cand) {
      const Vec2 p0 = mesh->vertices.row(mesh->triangles(t, 0)).transpose();
      const Vec2 p1 = mesh->vertices.row(mesh->triangles(t, 1)).transpose();
      const Vec2 p2 = mesh->vertices.row(mesh->triangles(t, 2)).transpose();
      const double den = 2.0 * tri_area(p0, p1, p2);
      if (den <= 0.0) continue;
      const double l0 = 2.0 * tri_area(p, p1, p2) / den;
      const double l1 = 2.0 * tri_area(p0, p, p2) / den;
      const double l2 = 1.0 - l0 - l1;
      if (l0 >= tol && l1 >= tol && l2 >= tol) {
        bary = {l0, l1, l2};
        return t;
      }
    }
    return -1;
  }
};

}  // namespace

Vec interpolate(const Mesh& src, const Vec& u, const Mesh& dst) {
  if (u.size() != src.n_vertices())
    throw_error(Error::Code::Argument, "field size does not match source mesh");
  TriLocator loc(src);
  Vec out = Vec::Zero(dst.n_vertices());
  Eigen::Vector3d bary;
  for (Index v = 0; v < dst.n_vertices(); ++v) {
    const Vec2 p = dst.vertices.row(v).transpose();
    const int t = loc.locate(p, bary);
    if (t < 0) continue;  // outside the source domain: extension by zero
    out[v] = bary[0] * u[src.triangles(t, 0)] + bary[1] * u[src.triangles(t, 1)] +
             bary[2] * u[src.triangles(t, 2)];
  }
  return out;
}

namespace {

struct EdgeKey {
  int a, b;
  bool operator==(const EdgeKey& o) const { return a == o.a && b == o.b; }
};
struct EdgeKeyHash {
  size_t operator()(const EdgeKey& e) const {
    return std::hash<long long>()((static_cast<long long>(e.a) << 32) ^ e.b);
  }
};

}  // namespace

MeshQualityReport mesh_quality(const Mesh& mesh) {
  MeshQualityReport rep;
  rep.n_vertices = mesh.n_vertices();
  rep.n_triangles = mesh.n_triangles();
  rep.n_boundary_edges = static_cast<Index>(mesh.boundary_edges.size());
  rep.min_angle_deg = 180.0;

  std::unordered_map<EdgeKey, std::vector<int>, EdgeKeyHash> edge_tris;
  std::vector<double> size(mesh.n_triangles());
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    Vec2 p[3];
    for (int k = 0; k < 3; ++k)
      p[k] = mesh.vertices.row(mesh.triangles(t, k)).transpose();
    const double area = tri_area(p[0], p[1], p[2]);
    size[t] = std::sqrt(2.0 * std::abs(area));
    double lmax = 0.0, per = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double l = (p[(k + 1) % 3] - p[k]).norm();
      lmax = std::max(lmax, l);
      per += l;
      const Vec2 u = (p[(k + 1) % 3] - p[k]).normalized();
      const Vec2 v = (p[(k + 2) % 3] - p[k]).normalized();
      const double ang = std::acos(std::clamp(u.dot(v), -1.0, 1.0)) * 180.0 / kPi;
      rep.min_angle_deg = std::min(rep.min_angle_deg, ang);
      int va = mesh.triangles(t, k), vb = mesh.triangles(t, (k + 1) % 3);
      if (va > vb) std::swap(va, vb);
      edge_tris[{va, vb}].push_back(static_cast<int>(t));
    }
    const double inr = area / (0.5 * per);
    rep.max_aspect = std::max(rep.max_aspect, lmax / (2.0 * inr));
  }
  for (const auto& [e, ts] : edge_tris) {
    if (ts.size() == 2) {
      const double r = size[ts[0]] / size[ts[1]];
      rep.max_size_ratio = std::max(rep.max_size_ratio, std::max(r, 1.0 / r));
    }
  }
  for (const auto& hole : mesh.holes) {
    for (Index i = 0; i < hole.ring.rows(); ++i) {
      const Vec2 p = hole.ring.row(i).transpose();
      rep.boundary_fit = std::max(
          rep.boundary_fit, std::abs((p - hole.center).norm() - hole.radius));
    }
  }
  return rep;
}

std::string MeshQualityReport::to_string() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "vertices=%lld triangles=%lld bedges=%lld min_angle=%.3f "
                "max_aspect=%.3f size_ratio=%.3f boundary_fit=%.3e",
                static_cast<long long>(n_vertices),
                static_cast<long long>(n_triangles),
                static_cast<long long>(n_boundary_edges), min_angle_deg,
                max_aspect, max_size_ratio, boundary_fit);
  return buf;
}

void audit_mesh(const Mesh& mesh, const MeshOptions& opt) {
  for (Index t = 0; t < mesh.n_triangles(); ++t)
    if (!(mesh.triangle_area(t) > 0.0))
      throw_error(Error::Code::Mesh,
                  "triangle " + std::to_string(t) + " is degenerate or clockwise");

  std::unordered_map<EdgeKey, int, EdgeKeyHash> edge_count;
  for (Index t = 0; t < mesh.n_triangles(); ++t)
    for (int k = 0; k < 3; ++k) {
      int a = mesh.triangles(t, k), b = mesh.triangles(t, (k + 1) % 3);
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  std::unordered_set<long long> bset;
  for (const auto& e : mesh.boundary_edges) {
    const int a = std::min(e.v0, e.v1), b = std::max(e.v0, e.v1);
    bset.insert((static_cast<long long>(a) << 32) ^ b);
  }
  for (const auto& [e, c] : edge_count) {
    const bool is_boundary =
        bset.count((static_cast<long long>(e.a) << 32) ^ e.b) > 0;
    if (c > 2 || c < 1)
      throw_error(Error::Code::Mesh, "non-conforming edge incidence");
    if (is_boundary && c != 1)
      throw_error(Error::Code::Mesh, "boundary edge shared by two triangles");
    if (!is_boundary && c != 2)
      throw_error(Error::Code::Mesh, "interior edge not shared by two triangles");
  }

  const MeshQualityReport rep = mesh_quality(mesh);
  if (rep.min_angle_deg < opt.min_angle_deg)
    throw_error(Error::Code::Mesh, "minimum angle violated: " + rep.to_string());
  for (const auto& hole : mesh.holes) {
    const double tol =
        1e-12 * hole.radius +
        8.0 * std::numeric_limits<double>::epsilon() *
            (hole.center.cwiseAbs().sum() + hole.radius);
    for (Index i = 0; i < hole.ring.rows(); ++i) {
      const Vec2 p = hole.ring.row(i).transpose();
      if (std::abs((p - hole.center).norm() - hole.radius) > tol)
        throw_error(Error::Code::Mesh, "hole ring vertex off its circle");
    }
  }
}

}  // namespace perfhom
