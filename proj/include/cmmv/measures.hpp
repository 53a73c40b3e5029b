#pragma once

// One-dimensional probability measures: finite-support laws, density-backed
// laws on a closed interval, and the standard normal.  Provides CDFs,
// right-quantiles F^{-1}(y) = inf{x | F(x) > y}, moments, and the exact
// Wasserstein-2 distance through the quantile coupling
//   W2^2 = int_0^1 (F1^{-1}(u) - F2^{-1}(u))^2 du.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cmmv/math/interp.hpp"
#include "cmmv/math/normal.hpp"
#include "cmmv/math/quadrature.hpp"

namespace cmmv {

// ---------------------------------------------------------------------------
// FiniteMeasure

class FiniteMeasure {
 public:
  // Weights must be strictly positive; sums within 1e-9 of 1 are renormalized,
  // larger deviations are rejected.  Support must be strictly increasing.
  FiniteMeasure(std::vector<double> support, std::vector<double> weights)
      : support_(std::move(support)), weights_(std::move(weights)) {
    if (support_.empty() || support_.size() != weights_.size())
      throw std::invalid_argument("FiniteMeasure: sizes");
    for (size_t i = 0; i < support_.size(); ++i) {
      if (!(weights_[i] > 0.0)) throw std::invalid_argument("FiniteMeasure: weights must be > 0");
      if (i > 0 && !(support_[i] > support_[i - 1]))
        throw std::invalid_argument("FiniteMeasure: support must be strictly increasing");
    }
    double s = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (std::fabs(s - 1.0) > 1e-9)
      throw std::invalid_argument("FiniteMeasure: weights sum deviates from 1 by more than 1e-9");
    for (double& w : weights_) w /= s;
    cum_.resize(weights_.size());
    double acc = 0.0;
    for (size_t i = 0; i < weights_.size(); ++i) {
      acc += weights_[i];
      cum_[i] = acc;
    }
    cum_.back() = 1.0;
  }

  size_t size() const { return support_.size(); }
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  // cum()[i] = F(support()[i])
  const std::vector<double>& cum() const { return cum_; }

  double cdf(double x) const {
    auto it = std::upper_bound(support_.begin(), support_.end(), x);
    size_t i = static_cast<size_t>(it - support_.begin());
    return i == 0 ? 0.0 : cum_[i - 1];
  }

  // F(x-) = mass strictly below x.
  double cdf_left(double x) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), x);
    size_t i = static_cast<size_t>(it - support_.begin());
    return i == 0 ? 0.0 : cum_[i - 1];
  }

  // Right inverse; y = 1 clamps to the support supremum.
  double quantile(double y) const {
    if (!(y >= 0.0 && y <= 1.0)) throw std::domain_error("FiniteMeasure::quantile: y outside [0,1]");
    if (y >= 1.0) return support_.back();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), y);
    size_t i = static_cast<size_t>(it - cum_.begin());
    return support_[std::min(i, support_.size() - 1)];
  }

  double mean() const {
    double s = 0.0;
    for (size_t i = 0; i < size(); ++i) s += weights_[i] * support_[i];
    return s;
  }

  double second_moment() const {
    double s = 0.0;
    for (size_t i = 0; i < size(); ++i) s += weights_[i] * support_[i] * support_[i];
    return s;
  }

 private:
  std::vector<double> support_, weights_, cum_;
};

// Law of (sum_{i<=n} u_i)/sqrt(n) for independent fair signs: support
// (2k-n)/sqrt(n), weights C(n,k) 2^{-n} built from exact ratio recurrences.
inline FiniteMeasure binomial_step_law(int n) {
  if (n < 1) throw std::domain_error("binomial_step_law: n >= 1 required");
  const double rn = std::sqrt(static_cast<double>(n));
  std::vector<double> support(n + 1), weights(n + 1);
  const int mid = n / 2;
  weights[mid] = std::exp(std::lgamma(n + 1.0) - std::lgamma(mid + 1.0) -
                          std::lgamma(n - mid + 1.0) - n * std::log(2.0));
  for (int k = mid; k < n; ++k) weights[k + 1] = weights[k] * (n - k) / (k + 1.0);
  for (int k = mid; k > 0; --k) weights[k - 1] = weights[k] * k / (n - k + 1.0);
  for (int k = 0; k <= n; ++k) support[k] = (2.0 * k - n) / rn;
  return FiniteMeasure(std::move(support), std::move(weights));
}

// ---------------------------------------------------------------------------
// DensityMeasure

// A law on [a,b] given by a strictly positive density.  The density is a
// monotone cubic through its knots; the CDF is the cached knot table with a
// monotone cubic in between (slopes limited the pchip way), inverted by
// safeguarded Newton to 1e-12.
class DensityMeasure {
 public:
  static DensityMeasure uniform(double a = 0.0, double b = 1.0) {
    if (!(b > a)) throw std::invalid_argument("DensityMeasure::uniform: b > a required");
    const double f = 1.0 / (b - a);
    return DensityMeasure({a, b}, {f, f}, {0.0, 1.0}, /*renorm_tol=*/1e-9);
  }

  // Density sampled on a knot grid; mass deviations up to `renorm_tol` are
  // renormalized away, larger ones rejected.
  static DensityMeasure from_table(std::vector<double> x, std::vector<double> f,
                                   double renorm_tol = 1e-6) {
    if (x.size() < 2 || x.size() != f.size())
      throw std::invalid_argument("DensityMeasure: bad table sizes");
    CubicHermite dens(x, f, pchip_slopes(x, f));
    static const QuadRule gl4 = gauss_legendre(4);
    std::vector<double> F(x.size(), 0.0);
    for (size_t i = 0; i + 1 < x.size(); ++i)
      F[i + 1] = F[i] + integrate_mapped(gl4, [&](double t) { return dens(t); }, x[i], x[i + 1]);
    return DensityMeasure(std::move(x), std::move(f), std::move(F), renorm_tol);
  }

  // Analytically consistent (F, f) pair, e.g. a CDF known in closed form.
  static DensityMeasure from_cdf_grid(std::vector<double> x, std::vector<double> f,
                                      std::vector<double> F, double renorm_tol = 1e-6) {
    return DensityMeasure(std::move(x), std::move(f), std::move(F), renorm_tol);
  }

  double a() const { return knots_.front(); }
  double b() const { return knots_.back(); }
  double eps_f() const { return eps_f_; }
  const std::vector<double>& knots() const { return knots_; }

  double density(double x) const {
    if (x < a() || x > b()) return 0.0;
    return density_(x);
  }

  double cdf(double x) const {
    if (x <= a()) return 0.0;
    if (x >= b()) return 1.0;
    return std::clamp(cdf_(x), 0.0, 1.0);
  }

  double quantile(double y) const {
    if (!(y >= 0.0 && y <= 1.0)) throw std::domain_error("DensityMeasure::quantile: y outside [0,1]");
    if (y <= 0.0) return a();
    if (y >= 1.0) return b();
    return invert_monotone(cdf_, y, a(), b(), 1e-12);
  }

  double mean() const { return moment(1); }
  double second_moment() const { return moment(2); }

 private:
  DensityMeasure(std::vector<double> x, std::vector<double> f, std::vector<double> F,
                 double renorm_tol)
      : knots_(std::move(x)) {
    const size_t n = knots_.size();
    if (n < 2 || f.size() != n || F.size() != n)
      throw std::invalid_argument("DensityMeasure: bad grid sizes");
    const double mass = F.back() - F.front();
    if (!(mass > 0.0) || std::fabs(mass - 1.0) > renorm_tol)
      throw std::invalid_argument("DensityMeasure: density mass deviates from 1 beyond tolerance");
    for (size_t i = 0; i < n; ++i) {
      if (!(f[i] > 0.0)) throw std::invalid_argument("DensityMeasure: density must be > 0");
      f[i] /= mass;
    }
    const double F0 = F.front();
    for (size_t i = 0; i < n; ++i) F[i] = (F[i] - F0) / mass;
    F.back() = 1.0;
    eps_f_ = *std::min_element(f.begin(), f.end());

    density_ = CubicHermite(knots_, f, pchip_slopes(knots_, f));

    // CDF slopes start from the density and are limited to keep the cubic
    // monotone (Fritsch-Carlson circle).
    std::vector<double> d = f;
    for (size_t i = 0; i + 1 < n; ++i) {
      const double h = knots_[i + 1] - knots_[i];
      const double delta = (F[i + 1] - F[i]) / h;
      if (delta <= 0.0) throw std::invalid_argument("DensityMeasure: CDF not strictly increasing");
      const double al = d[i] / delta, be = d[i + 1] / delta;
      const double r = al * al + be * be;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        d[i] *= tau;
        d[i + 1] *= tau;
      }
    }
    cdf_ = CubicHermite(knots_, F, d);
  }

  double moment(int p) const {
    static const QuadRule gl8 = gauss_legendre(8);
    double s = 0.0;
    for (size_t i = 0; i + 1 < knots_.size(); ++i)
      s += integrate_mapped(
          gl8, [&](double t) { return (p == 1 ? t : t * t) * density_(t); }, knots_[i],
          knots_[i + 1]);
    return s;
  }

  std::vector<double> knots_;
  CubicHermite density_, cdf_;
  double eps_f_ = 0.0;
};

// ---------------------------------------------------------------------------
// StandardNormal

struct StandardNormal {
  double cdf(double x) const { return normal_cdf(x); }
  double quantile(double y) const {
    if (!(y >= 0.0 && y <= 1.0)) throw std::domain_error("StandardNormal::quantile: y outside [0,1]");
    return normal_quantile(y);
  }
  double mean() const { return 0.0; }
  double second_moment() const { return 1.0; }
};

// ---------------------------------------------------------------------------
// Measure1D

using Measure1D = std::variant<FiniteMeasure, DensityMeasure, StandardNormal>;

inline double cdf(const Measure1D& m, double x) {
  return std::visit([&](const auto& v) { return v.cdf(x); }, m);
}

inline double cdf_left(const Measure1D& m, double x) {
  if (const auto* f = std::get_if<FiniteMeasure>(&m)) return f->cdf_left(x);
  return cdf(m, x);
}

inline double quantile(const Measure1D& m, double y) {
  return std::visit([&](const auto& v) { return v.quantile(y); }, m);
}

inline double mean(const Measure1D& m) {
  return std::visit([](const auto& v) { return v.mean(); }, m);
}

inline double second_moment(const Measure1D& m) {
  return std::visit([](const auto& v) { return v.second_moment(); }, m);
}

// ---------------------------------------------------------------------------
// Wasserstein-2

namespace detail {

// Exact merge of two quantile step functions.
inline double w2sq_finite_finite(const FiniteMeasure& m1, const FiniteMeasure& m2) {
  size_t i = 0, j = 0;
  double u = 0.0, acc = 0.0;
  const auto &c1 = m1.cum(), &c2 = m2.cum();
  while (u < 1.0) {
    const double next = std::min(c1[i], c2[j]);
    const double d = m1.support()[i] - m2.support()[j];
    acc += d * d * (next - u);
    u = next;
    if (c1[i] <= u && i + 1 < c1.size()) ++i;
    if (c2[j] <= u && j + 1 < c2.size()) ++j;
    if (u >= 1.0) break;
    if (c1[i] >= 1.0 && c2[j] >= 1.0 && next >= 1.0) break;
  }
  return acc;
}

// Closed form against the normal quantile via partial moments.
inline double w2sq_finite_normal(const FiniteMeasure& m) {
  double acc = 0.0;
  double ulo = 0.0;
  double zlo = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < m.size(); ++i) {
    const double uhi = m.cum()[i];
    const double zhi = (uhi >= 1.0) ? std::numeric_limits<double>::infinity() : normal_quantile(uhi);
    const double s = m.support()[i];
    acc += normal_partial_m2(zlo, zhi) - 2.0 * s * normal_partial_m1(zlo, zhi) +
           s * s * (uhi - ulo);
    ulo = uhi;
    zlo = zhi;
  }
  return acc;
}

inline void gather_u_breaks(const Measure1D& m, std::vector<double>& breaks) {
  if (const auto* f = std::get_if<FiniteMeasure>(&m)) {
    for (double c : f->cum()) breaks.push_back(c);
  } else if (const auto* d = std::get_if<DensityMeasure>(&m)) {
    for (double x : d->knots()) breaks.push_back(d->cdf(x));
  }
}

template <typename F>
double adaptive_gl(const QuadRule& rule, F&& f, double a, double b, double tol, int depth) {
  const double whole = integrate_mapped(rule, f, a, b);
  const double m = 0.5 * (a + b);
  const double split = integrate_mapped(rule, f, a, m) + integrate_mapped(rule, f, m, b);
  if (depth <= 0 || std::fabs(split - whole) <= tol) return split;
  return adaptive_gl(rule, f, a, m, 0.5 * tol, depth - 1) +
         adaptive_gl(rule, f, m, b, 0.5 * tol, depth - 1);
}

// Generic quantile-coupling integral for pairs involving a density.
inline double w2sq_quadrature(const Measure1D& m1, const Measure1D& m2) {
  std::vector<double> breaks{0.0, 1.0};
  gather_u_breaks(m1, breaks);
  gather_u_breaks(m2, breaks);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::fabs(a - b) < 1e-15; }),
               breaks.end());
  static const QuadRule gl16 = gauss_legendre(16);
  double acc = 0.0;
  for (size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = std::max(0.0, breaks[k]);
    const double b = std::min(1.0, breaks[k + 1]);
    if (b <= a) continue;
    auto f = [&](double u) {
      const double d = quantile(m1, u) - quantile(m2, u);
      return d * d;
    };
    acc += adaptive_gl(gl16, f, a, b, 1e-13, 24);
  }
  return acc;
}

// E[Z q(Phi(Z))] for a bounded quantile q, by Gauss-Hermite.
inline double normal_cross_term(const DensityMeasure& d) {
  static const QuadRule gh = gauss_hermite_prob(128);
  double s = 0.0;
  for (size_t i = 0; i < gh.nodes.size(); ++i) {
    const double z = gh.nodes[i];
    s += gh.weights[i] * z * d.quantile(std::clamp(normal_cdf(z), 0.0, 1.0));
  }
  return s;
}

}  // namespace detail

inline double wasserstein2(const Measure1D& m1, const Measure1D& m2) {
  const bool n1 = std::holds_alternative<StandardNormal>(m1);
  const bool n2 = std::holds_alternative<StandardNormal>(m2);
  if (n1 && n2) return 0.0;
  if (const auto* f1 = std::get_if<FiniteMeasure>(&m1)) {
    if (const auto* f2 = std::get_if<FiniteMeasure>(&m2))
      return std::sqrt(std::max(0.0, detail::w2sq_finite_finite(*f1, *f2)));
    if (n2) return std::sqrt(std::max(0.0, detail::w2sq_finite_normal(*f1)));
  }
  if (n1) {
    if (const auto* f2 = std::get_if<FiniteMeasure>(&m2))
      return std::sqrt(std::max(0.0, detail::w2sq_finite_normal(*f2)));
    const auto& d2 = std::get<DensityMeasure>(m2);
    const double s = 1.0 - 2.0 * detail::normal_cross_term(d2) + d2.second_moment();
    return std::sqrt(std::max(0.0, s));
  }
  if (n2) return wasserstein2(m2, m1);
  return std::sqrt(std::max(0.0, detail::w2sq_quadrature(m1, m2)));
}

// ---------------------------------------------------------------------------
// RiskFunction

// H with derivative H' and certified bounds eps < H' < K; convexity is
// checked as monotonicity of H' on a probe grid.
class RiskFunction {
 public:
  using Fn = std::function<double(double)>;

  RiskFunction(Fn h, Fn h_prime, double eps, double cap, Fn h_second = nullptr,
               std::string name = "custom", std::vector<double> params = {})
      : h_(std::move(h)),
        hp_(std::move(h_prime)),
        hpp_(std::move(h_second)),
        eps_(eps),
        cap_(cap),
        name_(std::move(name)),
        params_(std::move(params)) {
    if (!(eps_ > 0.0) || !(cap_ > eps_))
      throw std::invalid_argument("RiskFunction: need 0 < eps < K");
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200; ++i) {
      const double x = -20.0 + 0.2 * i;
      const double d = hp_(x);
      if (!(d > eps_) || !(d < cap_))
        throw std::invalid_argument("RiskFunction: H' leaves (eps, K) on probe grid");
      if (d < prev - 1e-12) throw std::invalid_argument("RiskFunction: H' decreasing on probe grid");
      prev = d;
    }
  }

  double value(double x) const { return h_(x); }
  double prime(double x) const { return hp_(x); }
  bool has_second() const { return static_cast<bool>(hpp_); }
  double second(double x) const { return hpp_(x); }
  double eps() const { return eps_; }
  double cap() const { return cap_; }
  const std::string& name() const { return name_; }
  const std::vector<double>& params() const { return params_; }

  // H(x) = x; the degenerate benchmark where T is the identity.
  static RiskFunction risk_neutral() {
    return RiskFunction([](double x) { return x; }, [](double) { return 1.0; }, 0.5, 2.0,
                        [](double) { return 0.0; }, "risk_neutral");
  }

  // H(x) = lo*x + (hi-lo)*softplus(x): H' = lo + (hi-lo)*sigmoid in (lo,hi).
  static RiskFunction shifted_softplus(double lo = 0.5, double hi = 1.5) {
    if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("shifted_softplus: need 0 < lo < hi");
    auto softplus = [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); };
    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    return RiskFunction([=](double x) { return lo * x + (hi - lo) * softplus(x); },
                        [=](double x) { return lo + (hi - lo) * sigmoid(x); }, lo, hi,
                        [=](double x) {
                          const double s = sigmoid(x);
                          return (hi - lo) * s * (1.0 - s);
                        },
                        "shifted_softplus", {lo, hi});
  }

  static RiskFunction from_name(const std::string& name, const std::vector<double>& params) {
    if (name == "risk_neutral") return risk_neutral();
    if (name == "shifted_softplus") {
      if (params.empty()) return shifted_softplus();
      if (params.size() != 2) throw std::invalid_argument("shifted_softplus expects 2 params");
      return shifted_softplus(params[0], params[1]);
    }
    throw std::invalid_argument("unknown risk function family: " + name);
  }

 private:
  Fn h_, hp_, hpp_;
  double eps_, cap_;
  std::string name_;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// JSON serialization

inline nlohmann::json measure_to_json(const Measure1D& m) {
  nlohmann::json j;
  if (const auto* f = std::get_if<FiniteMeasure>(&m)) {
    j["type"] = "finite";
    j["support"] = f->support();
    j["weights"] = f->weights();
  } else if (const auto* d = std::get_if<DensityMeasure>(&m)) {
    if (d->knots().size() == 2 && std::fabs(d->density(d->a()) - d->density(d->b())) < 1e-15) {
      j["type"] = "density_uniform";
      j["a"] = d->a();
      j["b"] = d->b();
    } else {
      j["type"] = "density_table";
      j["x"] = d->knots();
      std::vector<double> f(d->knots().size());
      for (size_t i = 0; i < f.size(); ++i) f[i] = d->density(d->knots()[i]);
      j["f"] = f;
    }
  } else {
    j["type"] = "normal";
  }
  return j;
}

inline Measure1D measure_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "finite")
    return FiniteMeasure(j.at("support").get<std::vector<double>>(),
                         j.at("weights").get<std::vector<double>>());
  if (type == "density_uniform")
    return DensityMeasure::uniform(j.value("a", 0.0), j.value("b", 1.0));
  if (type == "density_table")
    return DensityMeasure::from_table(j.at("x").get<std::vector<double>>(),
                                      j.at("f").get<std::vector<double>>());
  if (type == "normal") return StandardNormal{};
  throw std::invalid_argument("measure_from_json: unknown type " + type);
}

}  // namespace cmmv
