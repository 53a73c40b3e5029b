#pragma once

// Gaussian quadrature rules (Golub-Welsch on the Jacobi matrix, eigenvalues
// by implicit QL, Christoffel weights from the orthonormal recurrence) and a
// plain adaptive Simpson integrator.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace cmmv {

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Eigenvalues of a symmetric tridiagonal matrix (diag d, off-diag e),
// implicit-shift QL. e has the same length as d; e[n-1] is scratch.
inline void tridiag_eigenvalues(std::vector<double>& d, std::vector<double>& e) {
  const int n = static_cast<int>(d.size());
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= 1e-300 + 2.3e-16 * dd) break;
      }
      if (m != l) {
        if (++iter == 60) throw std::runtime_error("tridiag_eigenvalues: no convergence");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0 ? std::fabs(r) : -std::fabs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        for (int i = m - 1; i >= l; --i) {
          double f = s * e[i];
          double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
        }
        if (r == 0.0 && m - 1 >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

// Gauss rule for the orthonormal three-term recurrence
//   x p_k = beta_{k+1} p_{k+1} + beta_k p_{k-1}   (diagonal terms zero)
// with total measure mass mu0.  Weight at node x: 1 / sum_k p_k(x)^2.
inline QuadRule gauss_from_recurrence(const std::vector<double>& beta, double mu0) {
  const int n = static_cast<int>(beta.size()) + 1;
  std::vector<double> d(n, 0.0), e(n, 0.0);
  for (int k = 0; k < n - 1; ++k) e[k] = beta[k];
  tridiag_eigenvalues(d, e);
  std::sort(d.begin(), d.end());
  QuadRule rule;
  rule.nodes = d;
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = d[i];
    double pm1 = 0.0, p = 1.0 / std::sqrt(mu0);
    double s = p * p;
    for (int k = 0; k < n - 1; ++k) {
      double pk1 = (x * p - (k > 0 ? beta[k - 1] : 0.0) * pm1) / beta[k];
      pm1 = p;
      p = pk1;
      s += p * p;
    }
    rule.weights[i] = 1.0 / s;
  }
  return rule;
}

}  // namespace detail

// Nodes/weights on [-1,1] for weight 1 (sum of weights = 2).
inline QuadRule gauss_legendre(int n) {
  if (n < 1) throw std::domain_error("gauss_legendre: n >= 1 required");
  std::vector<double> beta(n - 1);
  for (int k = 1; k < n; ++k) beta[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::gauss_from_recurrence(beta, 2.0);
}

// Nodes/weights for integration against the standard normal density:
// sum_i w_i f(z_i) ~ E[f(Z)], Z ~ N(0,1).
inline QuadRule gauss_hermite_prob(int n) {
  if (n < 1) throw std::domain_error("gauss_hermite_prob: n >= 1 required");
  std::vector<double> beta(n - 1);
  for (int k = 1; k < n; ++k) beta[k - 1] = std::sqrt(static_cast<double>(k));
  return detail::gauss_from_recurrence(beta, 1.0);
}

// Integrate f over [a,b] with a rule given on [-1,1].
template <typename F>
double integrate_mapped(const QuadRule& rule, F&& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(c + h * rule.nodes[i]);
  return s * h;
}

namespace detail {

template <typename F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-12, int max_depth = 48) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace cmmv
