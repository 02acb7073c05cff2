// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include "perfhom/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_set>

#include <Eigen/SparseLU>

#include "perfhom/rng.hpp"

namespace perfhom {

namespace {

using Triplet = Eigen::Triplet<Complex>;

struct TriGeom {
  Vec2 p[3];
  double area;
  Vec2 grad[3];  // P1 basis gradients
};

TriGeom tri_geom(const Mesh& mesh, Index t) {
  TriGeom g;
  for (int k = 0; k < 3; ++k)
    g.p[k] = mesh.vertices.row(mesh.triangles(t, k)).transpose();
  const Vec2 e1 = g.p[1] - g.p[0], e2 = g.p[2] - g.p[0];
  const double det = e1.x() * e2.y() - e1.y() * e2.x();
  g.area = 0.5 * det;
  if (!(g.area > 0.0))
    throw_error(Error::Code::Assembly, "degenerate triangle in assembly");
  // grad phi_i = perp of the opposite edge / (2 area)
  g.grad[0] = Vec2(g.p[1].y() - g.p[2].y(), g.p[2].x() - g.p[1].x()) / det;
  g.grad[1] = Vec2(g.p[2].y() - g.p[0].y(), g.p[0].x() - g.p[2].x()) / det;
  g.grad[2] = Vec2(g.p[0].y() - g.p[1].y(), g.p[1].x() - g.p[0].x()) / det;
  return g;
}

SpMat from_triplets(Index n, std::vector<Triplet>& trip) {
  SpMat m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  m.prune([](const Index&, const Index&, const Complex& v) {
    return v != Complex(0.0, 0.0);
  });
  m.makeCompressed();
  return m;
}

}  // namespace

SpMat assemble_stiffness(const Mesh& mesh) {
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.n_triangles());
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const TriGeom g = tri_geom(mesh, t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(mesh.triangles(t, i), mesh.triangles(t, j),
                          Complex(g.area * g.grad[i].dot(g.grad[j]), 0.0));
  }
  return from_triplets(mesh.n_vertices(), trip);
}

SpMat assemble_mass(const Mesh& mesh) {
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.n_triangles());
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const double a12 = mesh.triangle_area(t) / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(mesh.triangles(t, i), mesh.triangles(t, j),
                          Complex(a12 * (i == j ? 2.0 : 1.0), 0.0));
  }
  return from_triplets(mesh.n_vertices(), trip);
}

SpMat assemble_mass_on(const Mesh& mesh, const std::vector<int>& triangles) {
  std::vector<Triplet> trip;
  trip.reserve(9 * triangles.size());
  for (int t : triangles) {
    const double a12 = mesh.triangle_area(t) / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(mesh.triangles(t, i), mesh.triangles(t, j),
                          Complex(a12 * (i == j ? 2.0 : 1.0), 0.0));
  }
  return from_triplets(mesh.n_vertices(), trip);
}

SpMat assemble_boundary_mass(const Mesh& mesh, const BoundarySelector& sel) {
  if (sel.hole_id >= 0) {
    bool found = false;
    for (const auto& e : mesh.boundary_edges)
      if (e.marker == sel.hole_id) {
        found = true;
        break;
      }
    if (!found)
      throw_error(Error::Code::Argument,
                  "unknown hole marker " + std::to_string(sel.hole_id));
  }
  std::vector<Triplet> trip;
  for (const auto& e : mesh.boundary_edges) {
    const bool take = (e.marker == kOuterMarker)
                          ? sel.outer_edges
                          : (sel.all_holes || e.marker == sel.hole_id);
    if (!take) continue;
    const double len = (mesh.vertices.row(e.v0) - mesh.vertices.row(e.v1)).norm();
    const double l6 = len / 6.0;
    trip.emplace_back(e.v0, e.v0, Complex(2.0 * l6, 0.0));
    trip.emplace_back(e.v1, e.v1, Complex(2.0 * l6, 0.0));
    trip.emplace_back(e.v0, e.v1, Complex(l6, 0.0));
    trip.emplace_back(e.v1, e.v0, Complex(l6, 0.0));
  }
  return from_triplets(mesh.n_vertices(), trip);
}

namespace {

template <typename WeightFn>
void weighted_local(const TriGeom& g, const WeightFn& w, double loc_mass[3][3],
                    double& wsum) {
  const Vec2 q[3] = {0.5 * (g.p[0] + g.p[1]), 0.5 * (g.p[1] + g.p[2]),
                     0.5 * (g.p[2] + g.p[0])};
  // phi[i][k] = value of basis i at midpoint k
  static constexpr double phi[3][3] = {
      {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}};
  double wq[3];
  wsum = 0.0;
  for (int k = 0; k < 3; ++k) {
    wq[k] = w(q[k]);
    wsum += wq[k];
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) v += wq[k] * phi[i][k] * phi[j][k];
      loc_mass[i][j] = v * g.area / 3.0;
    }
}

}  // namespace

SpMat assemble_weighted_mass(const Mesh& mesh, const WeightSpec& w) {
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.n_triangles());
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const TriGeom g = tri_geom(mesh, t);
    double loc[3][3], wsum;
    weighted_local(g, w, loc, wsum);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(mesh.triangles(t, i), mesh.triangles(t, j),
                          Complex(loc[i][j], 0.0));
  }
  return from_triplets(mesh.n_vertices(), trip);
}

SpMat assemble_weighted_stiffness(const Mesh& mesh, const WeightSpec& w) {
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.n_triangles());
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const TriGeom g = tri_geom(mesh, t);
    double loc[3][3], wsum;
    weighted_local(g, w, loc, wsum);
    const double scale = g.area * wsum / 3.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(mesh.triangles(t, i), mesh.triangles(t, j),
                          Complex(scale * g.grad[i].dot(g.grad[j]), 0.0));
  }
  return from_triplets(mesh.n_vertices(), trip);
}

Vec assemble_load(const Mesh& mesh, const ScalarField& f) {
  Vec load = Vec::Zero(mesh.n_vertices());
  static constexpr double phi[3][3] = {
      {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}};
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const TriGeom g = tri_geom(mesh, t);
    const Vec2 q[3] = {0.5 * (g.p[0] + g.p[1]), 0.5 * (g.p[1] + g.p[2]),
                       0.5 * (g.p[2] + g.p[0])};
    Complex fq[3];
    for (int k = 0; k < 3; ++k) fq[k] = f(q[k].x(), q[k].y());
    for (int i = 0; i < 3; ++i) {
      Complex v = 0.0;
      for (int k = 0; k < 3; ++k) v += fq[k] * phi[i][k];
      load[mesh.triangles(t, i)] += v * (g.area / 3.0);
    }
  }
  return load;
}

bool verify_symmetry(const SpMat& a, Symmetry sym, double tol) {
  if (sym == Symmetry::None) return true;
  const SpMat at = SpMat(a.transpose());
  double scale = 0.0, diff = 0.0;
  for (Index r = 0; r < a.outerSize(); ++r) {
    SpMat::InnerIterator ia(a, r), it(at, r);
    for (; ia && it; ++ia, ++it) {
      if (ia.col() != it.col()) return false;
      const Complex other =
          (sym == Symmetry::Hermitian) ? std::conj(it.value()) : it.value();
      diff = std::max(diff, std::abs(ia.value() - other));
      scale = std::max(scale, std::abs(ia.value()));
    }
    if (ia || it) return false;  // structurally non-symmetric
  }
  return diff <= tol * std::max(scale, 1.0);
}

Vec DiscreteOperator::to_free(const Vec& full) const {
  Vec red(n_free());
  for (Index i = 0; i < n_free(); ++i) red[i] = full[free_nodes[i]];
  return red;
}

Vec DiscreteOperator::from_free(const Vec& red) const {
  Vec full = Vec::Zero(n());
  for (Index i = 0; i < n_free(); ++i) full[free_nodes[i]] = red[i];
  return full;
}

namespace {

SpMat restrict_to(const SpMat& a, const std::vector<int>& keep) {
  std::vector<Index> map(a.rows(), -1);
  for (size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<Index>(i);
  std::vector<Triplet> trip;
  trip.reserve(a.nonZeros());
  for (Index r = 0; r < a.outerSize(); ++r)
    for (SpMat::InnerIterator it(a, r); it; ++it) {
      if (map[it.row()] >= 0 && map[it.col()] >= 0)
        trip.emplace_back(map[it.row()], map[it.col()], it.value());
    }
  SpMat out(static_cast<Index>(keep.size()), static_cast<Index>(keep.size()));
  out.setFromTriplets(trip.begin(), trip.end());
  out.makeCompressed();
  return out;
}

}  // namespace

DiscreteOperator build_operator(std::shared_ptr<const Mesh> mesh,
                                const BoundaryKind& bc, Complex mu,
                                Complex shift_c,
                                std::optional<BoundaryKind> outer_bc_opt) {
  bc.validate();
  const BoundaryKind outer_bc = outer_bc_opt.value_or(bc);
  outer_bc.validate();

  DiscreteOperator op;
  op.mesh = std::move(mesh);
  op.bc = bc;
  op.outer_bc = outer_bc;
  op.mu = mu;
  op.shift_c = shift_c;
  op.K = assemble_stiffness(*op.mesh);
  op.M = assemble_mass(*op.mesh);
  op.R_hole = assemble_boundary_mass(*op.mesh, BoundarySelector::holes());
  op.R_outer = assemble_boundary_mass(*op.mesh, BoundarySelector::outer());

  const Complex z = shift_c + Complex(1.0, 0.0) + mu;
  SpMat a = op.K + z * op.M;
  bool imag = z.imag() != 0.0;
  if (op.bc.kind == BcKind::Robin) {
    a = a + op.bc.alpha * op.R_hole;
    imag = imag || op.bc.alpha.imag() != 0.0;
  }
  if (op.outer_bc.kind == BcKind::Robin) {
    a = a + op.outer_bc.alpha * op.R_outer;
    imag = imag || op.outer_bc.alpha.imag() != 0.0;
  }
  a.prune([](const Index&, const Index&, const Complex& v) {
    return v != Complex(0.0, 0.0);
  });
  a.makeCompressed();
  op.A_full = std::move(a);
  op.symmetry = imag ? Symmetry::ComplexSymmetric : Symmetry::Hermitian;

  std::unordered_set<int> constrained;
  for (const auto& e : op.mesh->boundary_edges) {
    const BcKind k = (e.marker == kOuterMarker) ? op.outer_bc.kind : op.bc.kind;
    if (k == BcKind::Dirichlet) {
      constrained.insert(e.v0);
      constrained.insert(e.v1);
    }
  }
  op.dirichlet_nodes.assign(constrained.begin(), constrained.end());
  std::sort(op.dirichlet_nodes.begin(), op.dirichlet_nodes.end());
  op.free_nodes.reserve(op.n() - op.dirichlet_nodes.size());
  for (Index v = 0; v < op.n(); ++v)
    if (!constrained.count(static_cast<int>(v)))
      op.free_nodes.push_back(static_cast<int>(v));

  op.A_red = restrict_to(op.A_full, op.free_nodes);
  op.M_red = restrict_to(op.M, op.free_nodes);
  return op;
}

Vec harmonic_extension(const MeshPair& pair, const Vec& u_perf) {
  const Index np = pair.perforated.n_vertices();
  if (u_perf.size() != np)
    throw_error(Error::Code::Argument, "field size does not match the pair");
  if (pair.full.n_vertices() !=
      np + static_cast<Index>(pair.plug_vertices.size()))
    throw_error(Error::Code::Argument, "mesh pairing mismatch");

  Vec u_full = Vec::Zero(pair.full.n_vertices());
  u_full.head(np) = u_perf;
  if (pair.plug_vertices.empty()) return u_full;

  // Only plug triangles involve plug vertices, so the stiffness block of the
  // plug rows closes over plug + ring vertices.
  std::vector<Index> map(pair.full.n_vertices(), -1);
  for (size_t i = 0; i < pair.plug_vertices.size(); ++i)
    map[pair.plug_vertices[i]] = static_cast<Index>(i);

  std::vector<Triplet> app;
  Vec rhs = Vec::Zero(static_cast<Index>(pair.plug_vertices.size()));
  for (int t : pair.plug_triangles) {
    const TriGeom g = tri_geom(pair.full, t);
    for (int i = 0; i < 3; ++i) {
      const Index vi = pair.full.triangles(t, i);
      if (map[vi] < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const Index vj = pair.full.triangles(t, j);
        const double kij = g.area * g.grad[i].dot(g.grad[j]);
        if (map[vj] >= 0)
          app.emplace_back(map[vi], map[vj], Complex(kij, 0.0));
        else
          rhs[map[vi]] -= kij * u_full[vj];
      }
    }
  }
  SpMatCol kpp(static_cast<Index>(pair.plug_vertices.size()),
               static_cast<Index>(pair.plug_vertices.size()));
  kpp.setFromTriplets(app.begin(), app.end());
  Eigen::SparseLU<SpMatCol> lu(kpp);
  if (lu.info() != Eigen::Success)
    throw_error(Error::Code::Solver, "harmonic extension factorization failed");
  const Vec up = lu.solve(rhs);
  for (size_t i = 0; i < pair.plug_vertices.size(); ++i)
    u_full[pair.plug_vertices[i]] = up[static_cast<Index>(i)];
  return u_full;
}

double extension_energy_constant(const MeshPair& pair, const Vec& u_perf) {
  if (pair.perforated.holes.empty()) return 0.0;
  const Vec u_full = harmonic_extension(pair, u_perf);
  const auto& holes = pair.perforated.holes;
  const size_t nh = holes.size();

  std::vector<double> plug_energy(nh, 0.0), cell_h1(nh, 0.0);
  for (int t : pair.plug_triangles) {
    const TriGeom g = tri_geom(pair.full, t);
    const Vec2 c = (g.p[0] + g.p[1] + g.p[2]) / 3.0;
    int h = -1;
    for (size_t k = 0; k < nh; ++k)
      if ((c - holes[k].center).norm() <= holes[k].radius * 1.0001) {
        h = static_cast<int>(k);
        break;
      }
    if (h < 0) continue;
    Complex gx = 0.0, gy = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Complex ui = u_full[pair.full.triangles(t, i)];
      gx += ui * g.grad[i].x();
      gy += ui * g.grad[i].y();
    }
    plug_energy[h] += g.area * (std::norm(gx) + std::norm(gy));
  }

  // Cell half-width recovered from the lattice spacing (pitch 2 eps); with a
  // single hole the whole domain acts as its cell.
  double cell_half = std::numeric_limits<double>::infinity();
  if (nh >= 2) {
    double dmin = cell_half;
    for (size_t i = 1; i < nh; ++i)
      dmin = std::min(dmin, (holes[i].center - holes[0].center).norm());
    cell_half = 0.5 * dmin;
  }

  for (Index t = 0; t < pair.perforated.n_triangles(); ++t) {
    const TriGeom g = tri_geom(pair.perforated, t);
    const Vec2 c = (g.p[0] + g.p[1] + g.p[2]) / 3.0;
    int h = -1;
    for (size_t k = 0; k < nh; ++k) {
      const Vec2 d = c - holes[k].center;
      if (std::abs(d.x()) <= cell_half && std::abs(d.y()) <= cell_half) {
        h = static_cast<int>(k);
        break;
      }
    }
    if (h < 0) continue;
    Complex gx = 0.0, gy = 0.0, um = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Complex ui = u_perf[pair.perforated.triangles(t, i)];
      gx += ui * g.grad[i].x();
      gy += ui * g.grad[i].y();
      um += ui / 3.0;
    }
    cell_h1[h] += g.area * (std::norm(gx) + std::norm(gy) + std::norm(um));
  }

  double cmax = 0.0;
  for (size_t h = 0; h < nh; ++h)
    if (cell_h1[h] > 0.0) cmax = std::max(cmax, plug_energy[h] / cell_h1[h]);
  return cmax;
}

namespace {

// Sutherland-Hodgman clip of a convex polygon against the half-plane left of
// the directed segment (a -> b).
void clip_halfplane(std::vector<Vec2>& poly, const Vec2& a, const Vec2& b) {
  if (poly.empty()) return;
  std::vector<Vec2> out;
  out.reserve(poly.size() + 2);
  const Vec2 d = b - a;
  auto side = [&](const Vec2& p) {
    return d.x() * (p.y() - a.y()) - d.y() * (p.x() - a.x());
  };
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    const double sp = side(p), sq = side(q);
    if (sp >= 0.0) out.push_back(p);
    if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
      const double t = sp / (sp - sq);
      out.push_back(p + t * (q - p));
    }
  }
  poly = std::move(out);
}

// Integral of |u|^2 over (triangle t) intersect (hole polygon); u is P1.
double clipped_sq_integral(const Mesh& full, const Vec& u, Index t,
                           const HolePolygon& hole) {
  const TriGeom g = tri_geom(full, t);
  std::vector<Vec2> poly = {g.p[0], g.p[1], g.p[2]};
  const Index n = hole.ring.rows();
  for (Index i = 0; i < n && !poly.empty(); ++i) {
    const Vec2 a = hole.ring.row(i).transpose();
    const Vec2 b = hole.ring.row((i + 1) % n).transpose();
    clip_halfplane(poly, a, b);
  }
  if (poly.size() < 3) return 0.0;

  const Complex u0 = u[full.triangles(t, 0)], u1 = u[full.triangles(t, 1)],
                u2 = u[full.triangles(t, 2)];
  auto eval = [&](const Vec2& p) {
    const double det = 2.0 * g.area;
    const double l0 = ((g.p[1].y() - g.p[2].y()) * (p.x() - g.p[2].x()) +
                       (g.p[2].x() - g.p[1].x()) * (p.y() - g.p[2].y())) /
                      det;
    const double l1 = ((g.p[2].y() - g.p[0].y()) * (p.x() - g.p[2].x()) +
                       (g.p[0].x() - g.p[2].x()) * (p.y() - g.p[2].y())) /
                      det;
    return l0 * u0 + l1 * u1 + (1.0 - l0 - l1) * u2;
  };

  double sum = 0.0;
  for (size_t i = 1; i + 1 < poly.size(); ++i) {
    const Vec2& p0 = poly[0];
    const Vec2& p1 = poly[i];
    const Vec2& p2 = poly[i + 1];
    const double area =
        0.5 * std::abs((p1.x() - p0.x()) * (p2.y() - p0.y()) -
                       (p2.x() - p0.x()) * (p1.y() - p0.y()));
    if (area == 0.0) continue;
    const Vec2 q[3] = {0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)};
    double s = 0.0;
    for (const auto& qq : q) s += std::norm(eval(qq));
    sum += s * area / 3.0;  // midpoint rule, exact for the quadratic |u|^2
  }
  return sum;
}

}  // namespace

double holes_l2_norm(const Mesh& full, const Vec& u_full,
                     const std::vector<HolePolygon>& holes) {
  if (u_full.size() != full.n_vertices())
    throw_error(Error::Code::Argument, "field size does not match mesh");
  double sum = 0.0;
  for (const auto& hole : holes) {
    const double reach = hole.radius + full.h_max;
    for (Index t = 0; t < full.n_triangles(); ++t) {
      bool near = false;
      for (int k = 0; k < 3 && !near; ++k) {
        const Vec2 p = full.vertices.row(full.triangles(t, k)).transpose();
        near = (p - hole.center).cwiseAbs().maxCoeff() <= reach;
      }
      if (!near) continue;
      sum += clipped_sq_integral(full, u_full, t, hole);
    }
  }
  return std::sqrt(sum);
}

double l2_defect(const Mesh& perf, const Vec& u_perf, const Mesh& full,
                 const Vec& u_full) {
  if (u_perf.size() != perf.n_vertices() || u_full.size() != full.n_vertices())
    throw_error(Error::Code::Argument, "field sizes do not match meshes");
  const Vec proj = interpolate(full, u_full, perf);
  const Vec diff = u_perf - proj;
  const SpMat mass = assemble_mass(perf);
  const double term1 = mass_inner(mass, diff, diff).real();
  const double term2 = holes_l2_norm(full, u_full, perf.holes);
  return std::sqrt(term1 + term2 * term2);
}

double ji_defect_estimate(const MeshPair& pair, int n_samples,
                          std::uint64_t seed) {
  if (n_samples < 1)
    throw_error(Error::Code::Argument, "n_samples must be >= 1");
  if (pair.plug_triangles.empty()) return 0.0;
  const SpMat k_full = assemble_stiffness(pair.full);
  const SpMat m_full = assemble_mass(pair.full);
  const SpMat m_holes = assemble_mass_on(pair.full, pair.plug_triangles);
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    Vec f(pair.full.n_vertices());
    for (Index i = 0; i < f.size(); ++i) f[i] = rng.cnormal();
    const double h1 =
        std::sqrt((f.adjoint() * (k_full * f + m_full * f))[0].real());
    f /= h1;
    worst = std::max(worst, std::sqrt((f.adjoint() * (m_holes * f))[0].real()));
  }
  return worst;
}

void export_matrix_coord(std::ostream& os, const SpMat& a) {
  char buf[128];
  for (Index r = 0; r < a.outerSize(); ++r)
    for (SpMat::InnerIterator it(a, r); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%lld %lld %.17g %.17g\n",
                    static_cast<long long>(it.row()),
                    static_cast<long long>(it.col()), it.value().real(),
                    it.value().imag());
      os << buf;
    }
}

double mass_norm(const SpMat& mass, const Vec& u) {
  return std::sqrt(std::max(0.0, (u.adjoint() * (mass * u))[0].real()));
}

Complex mass_inner(const SpMat& mass, const Vec& u, const Vec& v) {
  return (u.adjoint() * (mass * v))[0];
}

}  // namespace perfhom
