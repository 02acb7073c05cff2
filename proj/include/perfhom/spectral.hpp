// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "perfhom/lab.hpp"
#include "perfhom/solvers.hpp"

namespace perfhom {

// Sector of half-angle theta with its vertex on the real axis:
// z in Sigma_theta  <=>  |Im(z - vertex)| <= tan(theta) Re(z - vertex).
struct SectorSpec {
  Complex vertex{0.0, 0.0};
  double half_angle = 0.0;  // in (0, pi/2]
  bool contains(Complex z, double tol = 0.0) const;
};

struct SpectrumWindow {
  double re_lo = 0.0, re_hi = 1.0;
  double im_lo = -1e300, im_hi = 1e300;
  bool contains(Complex z) const {
    return z.real() >= re_lo && z.real() <= re_hi && z.imag() >= im_lo &&
           z.imag() <= im_hi;
  }
  // K_delta of the semigroup analysis: [0, Re mu] x [-|Im mu|, |Im mu|].
  static SpectrumWindow k_delta(Complex mu_alpha);
};

// Hausdorff distance of two finite point sets in C; infinity sentinel when
// exactly one is empty, 0 when both are.
double hausdorff_distance(const std::vector<Complex>& a,
                          const std::vector<Complex>& b);

// Windowed spectral comparison of the eps-operator and the limit operator.
double spectra_hausdorff(const DiscreteOperator& op_eps,
                         const DiscreteOperator& op_lim,
                         const SpectrumWindow& window, double tol = 1e-8,
                         int k_max = 64);

struct GapCheck {
  bool ok = true;
  std::vector<Complex> violators;
};

// True iff no eigenvalue of the B-form operator has real part inside
// (delta, Re mu - delta); mu is the strange term of the comparison limit.
GapCheck spectral_gap_check(const DiscreteOperator& op_b, double delta,
                            Complex mu, double tol = 1e-8);

// Rayleigh quotients u*(system)u / (u* M u) for seeded random complex nodal
// vectors on the free subspace.
std::vector<Complex> numerical_range_sample(const DiscreteOperator& op, int n,
                                            std::uint64_t seed);

enum class SectorVariant { Theta0, ThetaLambda, ThetaLambdaDelta };

// The sector-angle formulas of the semigroup analysis:
//   theta_0            = arctan(|Im a| / Re a)                (vertex 0)
//   theta_lambda       = arctan(|Im a| / (Re a - lam/(2^-d S_d)))  (vertex lam)
//   theta_lambda^delta = arctan(|Im mu| / (Re mu - lam - delta))   (vertex lam)
SectorSpec sector_angle(Complex alpha, double lam, int d, double delta,
                        SectorVariant variant);

struct DecayCurve {
  std::vector<double> t;
  std::vector<double> norm;          // estimated ||e^{-tB}|| (mass-weighted)
  double fitted_m = 0.0;             // smallest M with norm <= M e^{-lambda t}
  double fitted_lambda = 0.0;        // least-squares decay rate
};

// ||e^{-tB}|| over the grid by power iteration through the Crank-Nicolson
// propagator (30-iteration cap per the mass-weighted estimator contract).
DecayCurve semigroup_decay_curve(const DiscreteOperator& op_b,
                                 const std::vector<double>& t_grid, double tol,
                                 std::uint64_t seed);

// Smallest M with curve(t) <= M e^{-lambda t} over the whole grid.
double fit_decay_prefactor(const DecayCurve& curve, double lambda);

}  // namespace perfhom
