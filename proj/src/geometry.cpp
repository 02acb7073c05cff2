// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include "perfhom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace perfhom {

void BoundaryKind::validate() const {
  if (kind == BcKind::Robin) {
    if (alpha == Complex(0.0, 0.0))
      throw_error(Error::Code::Argument, "Robin condition requires alpha != 0");
    if (alpha.real() < 0.0)
      throw_error(Error::Code::Argument, "Robin condition requires Re(alpha) >= 0");
  } else if (alpha != Complex(0.0, 0.0)) {
    throw_error(Error::Code::Argument, "alpha is only meaningful for Robin conditions");
  }
}

const char* BoundaryKind::name() const {
  switch (kind) {
    case BcKind::Dirichlet: return "dirichlet";
    case BcKind::Neumann: return "neumann";
    case BcKind::Robin: return "robin";
  }
  return "?";
}

void DomainSpec::validate() const {
  if (dim != 2 && dim != 3)
    throw_error(Error::Code::Argument, "domain dimension must be 2 or 3");
  if (static_cast<int>(box.size()) != dim)
    throw_error(Error::Code::Argument, "box extent count must match dimension");
  for (double e : box)
    if (!(e > 0.0))
      throw_error(Error::Code::Argument, "box extents must be strictly positive");
}

double DomainSpec::diameter() const {
  double s = 0.0;
  for (double e : box) s += e * e;
  return std::sqrt(s);
}

double DomainSpec::volume() const {
  double v = 1.0;
  for (double e : box) v *= e;
  return v;
}

void PerforationSpec::validate() const {
  domain.validate();
  bc.validate();
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw_error(Error::Code::Argument, "epsilon must lie in (0,1)");
  if (bc.kind == BcKind::Neumann && !(neumann_exponent > 1.0))
    throw_error(Error::Code::Argument, "Neumann radius exponent must satisfy p > 1");
  if (radius_override && !(*radius_override > 0.0))
    throw_error(Error::Code::Argument, "radius override must be positive");
}

double hole_radius(const PerforationSpec& spec) {
  spec.validate();
  const double eps = spec.epsilon;
  const int d = spec.domain.dim;
  double a = 0.0;
  if (spec.radius_override) {
    a = *spec.radius_override;
  } else {
    switch (spec.bc.kind) {
      case BcKind::Dirichlet:
        a = (d == 2) ? std::exp(-1.0 / (eps * eps))
                     : std::pow(eps, double(d) / double(d - 2));
        break;
      case BcKind::Neumann:
        a = std::pow(eps, spec.neumann_exponent);
        break;
      case BcKind::Robin:
        a = std::pow(eps, double(d) / double(d - 1));
        break;
    }
  }
  if (!(a > 0.0))
    throw_error(Error::Code::Geometry, "hole radius must be positive");
  if (!(a < eps))
    throw_error(Error::Code::Geometry,
                "hole radius >= epsilon: scaling rule not applicable at this epsilon");
  return a;
}

std::vector<Vec3> lattice_centers(const DomainSpec& domain, double epsilon) {
  domain.validate();
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw_error(Error::Code::Argument, "epsilon must lie in (0,1)");

  const double pitch = 2.0 * epsilon;
  const int d = domain.dim;
  // Admissible index range per axis: i = pitch*k with dist(i, dOmega) > eps,
  // i.e. eps < i_j < L_j - eps in every coordinate (Euclidean distance to a
  // box boundary is the min over faces).
  std::vector<long> lo(d), hi(d);
  for (int j = 0; j < d; ++j) {
    // smallest k with pitch*k > eps, largest with pitch*k < L_j - eps
    lo[j] = static_cast<long>(std::floor(epsilon / pitch)) ;
    while (lo[j] * pitch <= epsilon) ++lo[j];
    hi[j] = static_cast<long>(std::ceil((domain.box[j] - epsilon) / pitch));
    while (hi[j] * pitch >= domain.box[j] - epsilon) --hi[j];
  }
  std::vector<Vec3> out;
  if (d == 2) {
    for (long kx = lo[0]; kx <= hi[0]; ++kx)
      for (long ky = lo[1]; ky <= hi[1]; ++ky)
        out.emplace_back(Vec3(kx * pitch, ky * pitch, 0.0));
  } else {
    for (long kx = lo[0]; kx <= hi[0]; ++kx)
      for (long ky = lo[1]; ky <= hi[1]; ++ky)
        for (long kz = lo[2]; kz <= hi[2]; ++kz)
          out.emplace_back(Vec3(kx * pitch, ky * pitch, kz * pitch));
  }
  std::sort(out.begin(), out.end(), [](const Vec3& a, const Vec3& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
  });
  return out;
}

double surface_area_unit_ball(int d) {
  if (d < 2)
    throw_error(Error::Code::Argument, "surface area requires d >= 2");
  // S_d = d * pi^{d/2} / Gamma(d/2 + 1)
  return double(d) * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

StrangeTerm strange_term(const BoundaryKind& bc, int d) {
  bc.validate();
  if (d < 2)
    throw_error(Error::Code::Argument, "strange term requires d >= 2");
  StrangeTerm st;
  st.iota = bc;
  st.dim = d;
  st.surface_area = surface_area_unit_ball(d);
  switch (bc.kind) {
    case BcKind::Dirichlet:
      st.mu = (d == 2) ? Complex(M_PI / 2.0, 0.0)
                       : Complex((d - 2) * st.surface_area / std::pow(2.0, d), 0.0);
      break;
    case BcKind::Neumann:
      st.mu = Complex(0.0, 0.0);
      break;
    case BcKind::Robin:
      st.mu = bc.alpha * (st.surface_area / std::pow(2.0, d));
      break;
  }
  return st;
}

CellGeometry cell_geometry(const Vec3& center, const PerforationSpec& spec) {
  CellGeometry c;
  c.center = center;
  c.hole_radius = hole_radius(spec);
  c.epsilon = spec.epsilon;
  return c;
}

Region classify_point(const Vec3& x, const PerforationSpec& spec,
                      const std::vector<Vec3>& centers) {
  spec.validate();
  const int d = spec.domain.dim;
  for (int j = 0; j < d; ++j)
    if (x[j] < 0.0 || x[j] > spec.domain.box[j]) return Region::Outside;
  if (d == 2 && x[2] != 0.0) return Region::Outside;

  const double a = hole_radius(spec);
  double r2_min = std::numeric_limits<double>::infinity();
  for (const Vec3& c : centers) r2_min = std::min(r2_min, (x - c).squaredNorm());
  if (r2_min <= a * a) return Region::Hole;
  if (r2_min <= spec.epsilon * spec.epsilon) return Region::Annulus;
  return Region::Bulk;
}

}  // namespace perfhom
