// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include "perfhom/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "perfhom/rng.hpp"

namespace perfhom {

bool SectorSpec::contains(Complex z, double tol) const {
  const Complex w = z - vertex;
  return std::abs(w.imag()) <= std::tan(half_angle) * w.real() + tol;
}

SpectrumWindow SpectrumWindow::k_delta(Complex mu_alpha) {
  SpectrumWindow w;
  w.re_lo = 0.0;
  w.re_hi = mu_alpha.real();
  w.im_hi = std::abs(mu_alpha.imag());
  w.im_lo = -w.im_hi;
  return w;
}

double hausdorff_distance(const std::vector<Complex>& a,
                          const std::vector<Complex>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty())
    return std::numeric_limits<double>::infinity();
  auto one_sided = [](const std::vector<Complex>& from,
                      const std::vector<Complex>& to) {
    double worst = 0.0;
    for (Complex z : from) {
      double best = std::numeric_limits<double>::infinity();
      for (Complex w : to) best = std::min(best, std::abs(z - w));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

double spectra_hausdorff(const DiscreteOperator& op_eps,
                         const DiscreteOperator& op_lim,
                         const SpectrumWindow& window, double tol, int k_max) {
  auto collect = [&](const DiscreteOperator& op) {
    const EigenResult res =
        eigs_window(op, window.re_lo, window.re_hi, k_max, tol);
    if (!res.converged)
      throw_error(Error::Code::Numerical,
                  "eigensolver did not converge over the window");
    std::vector<Complex> out;
    for (const auto& p : res.pairs)
      if (window.contains(p.lambda)) out.push_back(p.lambda);
    return out;
  };
  return hausdorff_distance(collect(op_eps), collect(op_lim));
}

GapCheck spectral_gap_check(const DiscreteOperator& op_b, double delta,
                            Complex mu, double tol) {
  GapCheck out;
  const double gap_lo = delta, gap_hi = mu.real() - delta;
  if (!(gap_lo < gap_hi)) return out;  // empty interval: vacuously true
  // default window covering the gap plus margin
  const EigenResult res = eigs_window(op_b, -0.1, mu.real() + 1.0,
                                      64, tol);
  for (const auto& p : res.pairs)
    if (p.lambda.real() > gap_lo && p.lambda.real() < gap_hi)
      out.violators.push_back(p.lambda);
  out.ok = out.violators.empty();
  return out;
}

std::vector<Complex> numerical_range_sample(const DiscreteOperator& op, int n,
                                            std::uint64_t seed) {
  if (n < 1) throw_error(Error::Code::Argument, "need n >= 1 samples");
  Rng rng(seed);
  std::vector<Complex> out;
  out.reserve(n);
  for (int s = 0; s < n; ++s) {
    Vec u(op.n_free());
    for (Index i = 0; i < u.size(); ++i) u[i] = rng.cnormal();
    const Complex num = (u.adjoint() * (op.A_red * u))[0];
    const Complex den = (u.adjoint() * (op.M_red * u))[0];
    out.push_back(num / den.real());
  }
  return out;
}

SectorSpec sector_angle(Complex alpha, double lam, int d, double delta,
                        SectorVariant variant) {
  if (!(alpha.real() > 0.0))
    throw_error(Error::Code::Argument,
                "sector angles require Re(alpha) > 0 (strict sectoriality)");
  const double sd = surface_area_unit_ball(d);
  const Complex mu = alpha * (sd / std::pow(2.0, d));
  SectorSpec sec;
  switch (variant) {
    case SectorVariant::Theta0:
      sec.vertex = 0.0;
      sec.half_angle = std::atan(std::abs(alpha.imag()) / alpha.real());
      break;
    case SectorVariant::ThetaLambda: {
      if (!(lam > 0.0 && lam < mu.real()))
        throw_error(Error::Code::Argument,
                    "theta_lambda requires lambda in (0, Re mu_alpha)");
      const double denom = alpha.real() - lam / (std::pow(2.0, -d) * sd);
      sec.vertex = Complex(lam, 0.0);
      sec.half_angle = std::atan(std::abs(alpha.imag()) / denom);
      break;
    }
    case SectorVariant::ThetaLambdaDelta: {
      if (!(delta > 0.0))
        throw_error(Error::Code::Argument, "delta must be positive");
      if (!(lam > 0.0 && lam < mu.real() - delta))
        throw_error(Error::Code::Argument,
                    "theta_lambda_delta requires lambda in (0, Re mu - delta)");
      sec.vertex = Complex(lam, 0.0);
      sec.half_angle =
          std::atan(std::abs(mu.imag()) / (mu.real() - lam - delta));
      break;
    }
  }
  return sec;
}

DecayCurve semigroup_decay_curve(const DiscreteOperator& op_b,
                                 const std::vector<double>& t_grid, double tol,
                                 std::uint64_t seed) {
  for (size_t i = 0; i + 1 < t_grid.size(); ++i)
    if (!(t_grid[i] < t_grid[i + 1]))
      throw_error(Error::Code::Argument, "t grid must be increasing");
  if (!t_grid.empty() && t_grid.front() < 0.0)
    throw_error(Error::Code::Argument, "t grid must be nonnegative");

  const Propagator prop(op_b);
  const double expm_tol = 0.1 * tol;
  DecayCurve curve;
  curve.t = t_grid;
  curve.norm.resize(t_grid.size());

  for (size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    if (t == 0.0) {
      curve.norm[i] = 1.0;
      continue;
    }
    LinearMap map;
    map.in_dim = map.out_dim = op_b.n();
    map.apply = [&prop, t, expm_tol](const Vec& v) {
      return prop.apply(t, v, expm_tol);
    };
    map.apply_adjoint = [&prop, t, expm_tol](const Vec& v) {
      return prop.apply_adjoint(t, v, expm_tol);
    };
    const auto rep =
        opnorm_diff(map, op_b.M, tol, Rng::substream(seed, i), 30);
    curve.norm[i] = rep.value;
  }

  // least-squares slope of log norm over the positive-t part of the grid
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (size_t i = 0; i < t_grid.size(); ++i) {
    if (curve.norm[i] <= 0.0) continue;
    sx += t_grid[i];
    sy += std::log(curve.norm[i]);
    sxx += t_grid[i] * t_grid[i];
    sxy += t_grid[i] * std::log(curve.norm[i]);
    ++n;
  }
  if (n >= 2 && sxx * n - sx * sx > 0.0) {
    curve.fitted_lambda = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    curve.fitted_m = fit_decay_prefactor(curve, curve.fitted_lambda);
  }
  return curve;
}

double fit_decay_prefactor(const DecayCurve& curve, double lambda) {
  double m = 0.0;
  for (size_t i = 0; i < curve.t.size(); ++i)
    m = std::max(m, curve.norm[i] * std::exp(lambda * curve.t[i]));
  return m;
}

}  // namespace perfhom
