#pragma once

#include <vector>

#include "spherad/rng.hpp"

namespace spherad {

// Numerics for the von Mises-Fisher family on the unit sphere S^{m-1} in
// R^m. The concentration kappa is always a fixed nonnegative constant, never
// a learned quantity; kappa = 0 is the uniform distribution on the sphere.

// Mean resultant length A_m(kappa) = I_{m/2}(kappa) / I_{m/2-1}(kappa),
// evaluated by a continued fraction (Lentz) with a small-argument series
// fallback. Strictly inside (0, 1) for kappa > 0, and 0 at kappa = 0.
double bessel_ratio(int m, double kappa);

// log C_m(kappa), the log normalizing constant of the density
// C_m(kappa) * exp(kappa * mu . z) with respect to surface measure.
double log_vmf_normalizer(int m, double kappa);

// log surface area of S^{m-1}.
double log_sphere_area(int m);

// log I_nu(x) for nu = m/2 - 1 >= 0 (integer or half-integer), x >= 0.
double log_bessel_i(int m, double x);

// KL(vMF(mu, kappa) || Uniform(S^{m-1})). Independent of mu; exactly 0 at
// kappa = 0.
double kl_to_uniform(int m, double kappa);

struct VmfParams {
  std::vector<double> mu;  // unit vector in R^m
  double kappa = 0.0;
};

// log density of a unit vector z under vMF(mu, kappa).
double vmf_log_density(const std::vector<double>& z, const VmfParams& p);

// Cosine of the angle to the mean direction, drawn by the Wood/Ulrich
// rejection scheme. Exposed separately for distribution tests.
double sample_vmf_cosine(int m, double kappa, Rng& rng);

// Sample in the frame whose pole is the last coordinate axis: the final
// component is the cosine, the first m-1 form the scaled tangent direction.
std::vector<double> sample_vmf_pole(int m, double kappa, Rng& rng);

// Sample from vMF(mu, kappa) via a Householder reflection carrying the pole
// onto mu (identity when mu is the pole itself).
std::vector<double> sample_vmf(const VmfParams& p, Rng& rng);

}  // namespace spherad
