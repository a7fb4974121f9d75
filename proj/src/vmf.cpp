#include "spherad/vmf.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "spherad/error.hpp"

namespace spherad {

namespace {

constexpr double kCfTol = 1e-14;
constexpr double kSeriesCutoff = 1e-6;
constexpr int kMaxRejection = 1000;

void check_dim(int m) {
  if (m < 2)
    throw DataError("sphere dimension must be at least 2, got " +
                    std::to_string(m));
}

void check_kappa(double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw DataError("concentration must be finite and nonnegative");
}

// I_{nu+1}(x) / I_nu(x) by the modified Lentz scheme on the continued
// fraction r_nu = 1 / (b_1 + 1 / (b_2 + ...)), b_j = 2(nu + j) / x. The
// number of slowly-converging terms grows like x, hence the x-dependent
// iteration budget.
double bessel_ratio_cf(double nu, double x) {
  constexpr double tiny = 1e-30;
  double f = tiny;
  double c = f;
  double d = 0.0;
  const int max_iter = 1000 + static_cast<int>(4.0 * x);
  for (int j = 1; j <= max_iter; ++j) {
    const double b = 2.0 * (nu + j) / x;
    d = b + d;
    if (d == 0.0) d = tiny;
    c = b + 1.0 / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < kCfTol) return f;
  }
  throw NumericError("Bessel ratio continued fraction failed to converge for "
                     "order " + std::to_string(nu) + ", argument " +
                     std::to_string(x));
}

// log I_0(x): Taylor series below the switch point, scaled asymptotic series
// above it.
double log_bessel_i0(double x) {
  if (x <= 15.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::log(sum);
  }
  double term = 1.0;
  double sum = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 40; ++k) {
    const double num = (2.0 * k - 1.0) * (2.0 * k - 1.0);
    term *= num / (8.0 * k * x);
    if (std::abs(term) >= std::abs(prev)) break;  // asymptotic tail turned
    sum += term;
    prev = term;
    if (std::abs(term) < 1e-17) break;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

// log I_{1/2}(x) = log(sqrt(2/(pi x)) * sinh x), written to avoid overflow.
double log_bessel_i_half(double x) {
  return 0.5 * (std::log(2.0) - std::log(std::numbers::pi) - std::log(x)) +
         x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0);
}

}  // namespace

double bessel_ratio(int m, double kappa) {
  check_dim(m);
  check_kappa(kappa);
  if (kappa == 0.0) return 0.0;
  const double nu = 0.5 * m - 1.0;
  if (kappa < kSeriesCutoff) return kappa / m;
  return bessel_ratio_cf(nu, kappa);
}

double log_bessel_i(int m, double x) {
  check_dim(m);
  const double nu = 0.5 * m - 1.0;
  if (!(x > 0.0))
    throw DataError("log Bessel argument must be positive");
  if (x < kSeriesCutoff)
    return nu * std::log(0.5 * x) - std::lgamma(nu + 1.0);
  double acc;
  int order_m;
  if (m % 2 == 0) {
    acc = log_bessel_i0(x);
    order_m = 2;  // next climb step is I_1 / I_0
  } else {
    acc = log_bessel_i_half(x);
    order_m = 3;  // next climb step is I_{3/2} / I_{1/2}
  }
  // Telescope up to order nu: log I_nu = log I_base + sum log ratios.
  for (; order_m <= m - 2; order_m += 2)
    acc += std::log(bessel_ratio_cf(0.5 * order_m - 1.0, x));
  return acc;
}

double log_sphere_area(int m) {
  check_dim(m);
  return std::log(2.0) + 0.5 * m * std::log(std::numbers::pi) -
         std::lgamma(0.5 * m);
}

double log_vmf_normalizer(int m, double kappa) {
  check_dim(m);
  check_kappa(kappa);
  if (kappa == 0.0) return -log_sphere_area(m);
  if (kappa < kSeriesCutoff)
    return -log_sphere_area(m) - std::log1p(kappa * kappa / (2.0 * m));
  const double nu = 0.5 * m - 1.0;
  return nu * std::log(kappa) - 0.5 * m * std::log(2.0 * std::numbers::pi) -
         log_bessel_i(m, kappa);
}

double kl_to_uniform(int m, double kappa) {
  check_dim(m);
  check_kappa(kappa);
  if (kappa == 0.0) return 0.0;
  return kappa * bessel_ratio(m, kappa) + log_vmf_normalizer(m, kappa) +
         log_sphere_area(m);
}

double vmf_log_density(const std::vector<double>& z, const VmfParams& p) {
  const int m = static_cast<int>(p.mu.size());
  check_dim(m);
  check_kappa(p.kappa);
  if (z.size() != p.mu.size())
    throw DataError("direction dimension mismatch in vmf_log_density");
  double nz = 0.0, nm = 0.0, dot = 0.0;
  for (int i = 0; i < m; ++i) {
    nz += z[i] * z[i];
    nm += p.mu[i] * p.mu[i];
    dot += z[i] * p.mu[i];
  }
  if (std::abs(std::sqrt(nz) - 1.0) > 1e-6)
    throw DataError("vmf_log_density input is not a unit vector");
  if (std::abs(std::sqrt(nm) - 1.0) > 1e-6)
    throw DataError("vmf mean direction is not a unit vector");
  return p.kappa * dot + log_vmf_normalizer(m, p.kappa);
}

double sample_vmf_cosine(int m, double kappa, Rng& rng) {
  check_dim(m);
  check_kappa(kappa);
  const double dm = m - 1.0;
  const double b =
      (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm * dm)) / dm;
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm * std::log(1.0 - x0 * x0);
  for (int iter = 0; iter < kMaxRejection; ++iter) {
    const double z = rng.beta(0.5 * dm, 0.5 * dm);
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform_pos();
    if (kappa * w + dm * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
  throw NumericError("directional sampler exceeded " +
                     std::to_string(kMaxRejection) +
                     " rejection iterations (m=" + std::to_string(m) +
                     ", kappa=" + std::to_string(kappa) + ")");
}

std::vector<double> sample_vmf_pole(int m, double kappa, Rng& rng) {
  const double w = sample_vmf_cosine(m, kappa, rng);
  std::vector<double> z(m, 0.0);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (int i = 0; i + 1 < m; ++i) {
      z[i] = rng.normal();
      norm2 += z[i] * z[i];
    }
  } while (norm2 == 0.0);
  const double scale = std::sqrt(std::max(0.0, 1.0 - w * w) / norm2);
  for (int i = 0; i + 1 < m; ++i) z[i] *= scale;
  z[m - 1] = w;
  double total = 0.0;
  for (double v : z) total += v * v;
  const double inv = 1.0 / std::sqrt(total);
  for (double& v : z) v *= inv;
  return z;
}

std::vector<double> sample_vmf(const VmfParams& p, Rng& rng) {
  const int m = static_cast<int>(p.mu.size());
  check_dim(m);
  check_kappa(p.kappa);
  double nm = 0.0;
  for (double v : p.mu) nm += v * v;
  if (std::abs(std::sqrt(nm) - 1.0) > 1e-6)
    throw DataError("vmf mean direction is not a unit vector");
  std::vector<double> z = sample_vmf_pole(m, p.kappa, rng);
  // Householder vector from the pole e_m to mu; near the pole the reflection
  // degenerates and the identity is used instead.
  std::vector<double> u(m);
  double un2 = 0.0;
  for (int i = 0; i < m; ++i) {
    u[i] = (i == m - 1 ? 1.0 : 0.0) - p.mu[i];
    un2 += u[i] * u[i];
  }
  if (un2 >= 1e-24) {
    const double inv = 1.0 / std::sqrt(un2);
    for (double& v : u) v *= inv;
    double dot = 0.0;
    for (int i = 0; i < m; ++i) dot += u[i] * z[i];
    for (int i = 0; i < m; ++i) z[i] -= 2.0 * dot * u[i];
  }
  double total = 0.0;
  for (double v : z) total += v * v;
  const double inv = 1.0 / std::sqrt(total);
  for (double& v : z) v *= inv;
  return z;
}

}  // namespace spherad
