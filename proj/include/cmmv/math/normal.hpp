#pragma once

// Standard normal pdf/cdf/quantile and the partial moments
// int z phi(z) dz, int z^2 phi(z) dz used by the exact W2 routines.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmmv {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438187;

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

namespace detail {

// Acklam's rational approximation, ~1.15e-9 relative accuracy.
inline double acklam_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

// Inverse of normal_cdf, refined to full double precision by Halley steps.
inline double normal_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("normal_quantile: p outside [0,1]");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  double z = detail::acklam_quantile(p);
  for (int it = 0; it < 2; ++it) {
    double e = normal_cdf(z) - p;
    double u = e / normal_pdf(z);
    z -= u / (1.0 + 0.5 * z * u);
  }
  return z;
}

// int_{z1}^{z2} z phi(z) dz = phi(z1) - phi(z2)
inline double normal_partial_m1(double z1, double z2) {
  auto f = [](double z) { return std::isinf(z) ? 0.0 : normal_pdf(z); };
  return f(z1) - f(z2);
}

// int_{z1}^{z2} z^2 phi(z) dz = [Phi(z) - z phi(z)]_{z1}^{z2}
inline double normal_partial_m2(double z1, double z2) {
  auto g = [](double z) {
    if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
    return normal_cdf(z) - z * normal_pdf(z);
  };
  return g(z2) - g(z1);
}

}  // namespace cmmv
