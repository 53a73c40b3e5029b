#pragma once

// Monotone rearrangement between mu and nu and the associated convex
// potentials: the quantile transforms
//   phi(l) = F_nu^{-1}(F_mu(l)),   gamma(s) = F_mu^{-1}(F_nu(s)),
// their primitives Gamma(s) = int_0^s gamma and Phi(l) = int_0^l phi, and the
// centered potential Psi(s) = Gamma(s) - E_lambda[Gamma].  For finite nu all
// of this is exact piecewise-linear arithmetic.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cmmv/math/interp.hpp"
#include "cmmv/measures.hpp"

namespace cmmv {

// ---------------------------------------------------------------------------
// TransportPotential

// A convex potential: either piecewise linear (breakpoints + nondecreasing
// slopes, one more slope than breakpoints) or a smooth callable pair for the
// continuous limit.  A Fenchel conjugate of a line-domain potential lives on
// the bounded domain [first slope, last slope]; the +/-inf slope entries at
// its ends mark the jump to +infinity outside.
class TransportPotential {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  TransportPotential(std::vector<double> breakpoints, std::vector<double> slopes, double offset)
      : breaks_(std::move(breakpoints)), slopes_(std::move(slopes)) {
    validate();
    values_.resize(breaks_.size());
    values_[0] = 0.0;
    for (size_t i = 0; i + 1 < breaks_.size(); ++i)
      values_[i + 1] = values_[i] + slopes_[i + 1] * (breaks_[i + 1] - breaks_[i]);
    const double g0 = eval_pl(0.0);  // primitive value at 0 before anchoring
    for (double& v : values_) v += offset - g0;
  }

  static TransportPotential smooth(std::function<double(double)> psi,
                                   std::function<double(double)> psi_prime) {
    TransportPotential p;
    p.psi_ = std::move(psi);
    p.psi_prime_ = std::move(psi_prime);
    return p;
  }

  bool is_smooth() const { return static_cast<bool>(psi_); }

  double operator()(double s) const {
    if (is_smooth()) return psi_(s);
    if (s < domain_lo() || s > domain_hi()) return kInf;
    return eval_pl(s);
  }

  // [left slope, right slope] at s (PL), or the degenerate {psi'(s)} (smooth).
  std::array<double, 2> subgradient(double s) const {
    if (is_smooth()) {
      const double d = psi_prime_(s);
      return {d, d};
    }
    auto it = std::lower_bound(breaks_.begin(), breaks_.end(), s);
    const size_t i = static_cast<size_t>(it - breaks_.begin());
    if (i < breaks_.size() && breaks_[i] == s) return {slopes_[i], slopes_[i + 1]};
    return {slopes_[i], slopes_[i]};
  }

  double derivative(double s) const {
    if (is_smooth()) return psi_prime_(s);
    return subgradient(s)[1];
  }

  // Legendre-Fenchel conjugate by inverting the subdifferential staircase.
  TransportPotential fenchel() const {
    if (is_smooth())
      throw std::logic_error("fenchel: only piecewise-linear potentials are conjugated");
    const size_t m = breaks_.size();
    std::vector<double> xb, xv, mids;
    double left_end = -kInf, right_end = kInf;  // conjugate end slopes
    for (size_t i = 0; i < m; ++i) {
      const double sl = slopes_[i], sr = slopes_[i + 1];
      if (std::isfinite(sl)) {
        if (xb.empty() || sl > xb.back()) {
          xb.push_back(sl);
          xv.push_back(sl * breaks_[i] - values_[i]);
        }
        if (std::isfinite(sr)) {
          if (sr > sl) {
            mids.push_back(breaks_[i]);
            xb.push_back(sr);
            xv.push_back(sr * breaks_[i] - values_[i]);
          }
        } else {
          right_end = breaks_[i];  // domain edge of *this on the right
        }
      } else if (std::isfinite(sr)) {
        left_end = breaks_[i];  // domain edge of *this on the left
        if (xb.empty() || sr > xb.back()) {
          xb.push_back(sr);
          xv.push_back(sr * breaks_[i] - values_[i]);
        }
      }
    }
    if (xb.empty()) throw std::logic_error("fenchel: no finite slope levels");
    std::vector<double> xs(xb.size() + 1);
    xs.front() = left_end;
    xs.back() = right_end;
    for (size_t k = 0; k < mids.size(); ++k) xs[k + 1] = mids[k];
    if (mids.size() + 2 != xs.size())
      throw std::logic_error("fenchel: inconsistent staircase");
    return TransportPotential(std::move(xb), std::move(xs), std::move(xv));
  }

  const std::vector<double>& breakpoints() const { return require_pl().breaks_; }
  const std::vector<double>& slopes() const { return require_pl().slopes_; }
  const std::vector<double>& values() const { return require_pl().values_; }
  double domain_lo() const { return std::isfinite(slopes_.front()) ? -kInf : breaks_.front(); }
  double domain_hi() const { return std::isfinite(slopes_.back()) ? kInf : breaks_.back(); }

  double offset() const {
    require_pl();
    TransportPotential g(breaks_, slopes_, 0.0);
    return values_[0] - g.eval_pl(breaks_[0]);
  }

  nlohmann::json to_json() const {
    require_pl();
    nlohmann::json j;
    j["schema"] = "tp-v1";
    j["breakpoints"] = breaks_;
    j["slopes"] = slopes_;
    j["offset"] = offset();
    return j;
  }

  static TransportPotential from_json(const nlohmann::json& j) {
    if (j.at("schema").get<std::string>() != "tp-v1")
      throw std::invalid_argument("TransportPotential: unknown schema");
    return TransportPotential(j.at("breakpoints").get<std::vector<double>>(),
                              j.at("slopes").get<std::vector<double>>(),
                              j.at("offset").get<double>());
  }

 private:
  TransportPotential() = default;

  TransportPotential(std::vector<double> breakpoints, std::vector<double> slopes,
                     std::vector<double> values)
      : breaks_(std::move(breakpoints)), slopes_(std::move(slopes)), values_(std::move(values)) {
    validate();
  }

  void validate() const {
    if (breaks_.empty() || slopes_.size() != breaks_.size() + 1 ||
        (!values_.empty() && values_.size() != breaks_.size()))
      throw std::invalid_argument("TransportPotential: need n breakpoints and n+1 slopes");
    for (size_t i = 1; i < breaks_.size(); ++i)
      if (!(breaks_[i] > breaks_[i - 1]))
        throw std::invalid_argument("TransportPotential: breakpoints must increase");
    for (size_t i = 1; i < slopes_.size(); ++i)
      if (std::isfinite(slopes_[i]) && std::isfinite(slopes_[i - 1]) &&
          slopes_[i] < slopes_[i - 1] - 1e-14)
        throw std::invalid_argument("TransportPotential: slopes must be nondecreasing");
  }

  double eval_pl(double s) const {
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), s);
    const size_t i = static_cast<size_t>(it - breaks_.begin());
    const size_t anchor = (i == 0) ? 0 : i - 1;
    const double delta = s - breaks_[anchor];
    if (delta == 0.0) return values_[anchor];
    return values_[anchor] + slopes_[i] * delta;
  }

  const TransportPotential& require_pl() const {
    if (is_smooth()) throw std::logic_error("TransportPotential: smooth variant has no PL data");
    return *this;
  }

  std::vector<double> breaks_, slopes_, values_;
  std::function<double(double)> psi_, psi_prime_;
};

// ---------------------------------------------------------------------------
// Quantile transforms

inline double phi_map(const DensityMeasure& mu, const Measure1D& nu, double ell) {
  return quantile(nu, mu.cdf(ell));
}

inline double gamma_map(const DensityMeasure& mu, const Measure1D& nu, double s) {
  return mu.quantile(cdf(nu, s));
}

namespace detail {

// gamma as a step function of s for finite nu: level j applies left of
// support point j; the last level right of the support.
struct GammaSteps {
  std::vector<double> breaks;  // nu support
  std::vector<double> levels;  // size breaks+1, values in supp(mu)
};

inline GammaSteps gamma_steps(const DensityMeasure& mu, const FiniteMeasure& nu) {
  GammaSteps g;
  g.breaks = nu.support();
  g.levels.resize(nu.size() + 1);
  g.levels[0] = mu.quantile(0.0);
  for (size_t i = 0; i < nu.size(); ++i) g.levels[i + 1] = mu.quantile(nu.cum()[i]);
  return g;
}

}  // namespace detail

// Gamma(s) = int_0^s gamma(t) dt; exact for finite nu, quadrature otherwise.
inline double big_gamma(const DensityMeasure& mu, const Measure1D& nu, double s) {
  if (const auto* f = std::get_if<FiniteMeasure>(&nu)) {
    auto g = detail::gamma_steps(mu, *f);
    return TransportPotential(g.breaks, g.levels, 0.0)(s);
  }
  return adaptive_simpson([&](double t) { return gamma_map(mu, nu, t); }, 0.0, s, 1e-11);
}

// Phi(l) = int_0^l phi(t) dt; exact for finite nu, quadrature otherwise.
inline double big_phi(const DensityMeasure& mu, const Measure1D& nu, double ell) {
  if (const auto* f = std::get_if<FiniteMeasure>(&nu)) {
    if (f->size() == 1) return f->support()[0] * ell;
    std::vector<double> breaks, levels{f->support()[0]};
    for (size_t i = 0; i + 1 < f->size(); ++i) {
      const double b = mu.quantile(f->cum()[i]);
      if (!breaks.empty() && !(b > breaks.back())) {
        levels.back() = f->support()[i + 1];
        continue;
      }
      breaks.push_back(b);
      levels.push_back(f->support()[i + 1]);
    }
    return TransportPotential(breaks, levels, 0.0)(ell);
  }
  return adaptive_simpson([&](double t) { return phi_map(mu, nu, t); }, 0.0, ell, 1e-11);
}

namespace detail {

// E_lambda[p] for piecewise-linear p; exact against finite and normal lambda.
inline double expect_pl(const TransportPotential& p, const Measure1D& lam) {
  if (const auto* f = std::get_if<FiniteMeasure>(&lam)) {
    double s = 0.0;
    for (size_t i = 0; i < f->size(); ++i) s += f->weights()[i] * p(f->support()[i]);
    return s;
  }
  if (std::holds_alternative<StandardNormal>(lam)) {
    const auto& b = p.breakpoints();
    const auto& sl = p.slopes();
    const auto& v = p.values();
    const double inf = std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (size_t j = 0; j <= b.size(); ++j) {
      const double z1 = (j == 0) ? -inf : b[j - 1];
      const double z2 = (j == b.size()) ? inf : b[j];
      const size_t anchor = (j == 0) ? 0 : j - 1;
      const double a0 = v[anchor] - sl[j] * b[anchor];
      acc += a0 * (normal_cdf(z2) - normal_cdf(z1)) + sl[j] * normal_partial_m1(z1, z2);
    }
    return acc;
  }
  const auto& d = std::get<DensityMeasure>(lam);
  static const QuadRule gl8 = gauss_legendre(8);
  double acc = 0.0;
  const auto& kn = d.knots();
  for (size_t i = 0; i + 1 < kn.size(); ++i)
    acc += integrate_mapped(gl8, [&](double t) { return p(t) * d.density(t); }, kn[i], kn[i + 1]);
  return acc;
}

}  // namespace detail

// Psi_{nu,lambda}(s) = Gamma_nu(s) - E_lambda[Gamma_nu].
inline TransportPotential psi_potential(const DensityMeasure& mu, const Measure1D& nu,
                                        const Measure1D& lam) {
  if (const auto* f = std::get_if<FiniteMeasure>(&nu)) {
    auto g = detail::gamma_steps(mu, *f);
    TransportPotential gamma(g.breaks, g.levels, 0.0);
    return TransportPotential(g.breaks, g.levels, -detail::expect_pl(gamma, lam));
  }
  // continuous nu: tabulate Gamma on a grid and hand out the smooth pair
  std::vector<double> s;
  if (const auto* d = std::get_if<DensityMeasure>(&nu)) {
    s = d->knots();
  } else {
    for (int i = 0; i <= 1600; ++i) s.push_back(-8.0 + i * 0.01);
  }
  std::vector<double> gam(s.size()), gprime(s.size());
  for (size_t i = 0; i < s.size(); ++i) gprime[i] = gamma_map(mu, nu, s[i]);
  static const QuadRule gl16 = gauss_legendre(16);
  gam[0] = big_gamma(mu, nu, s[0]);
  for (size_t i = 0; i + 1 < s.size(); ++i)
    gam[i + 1] = gam[i] + integrate_mapped(
                              gl16, [&](double t) { return gamma_map(mu, nu, t); }, s[i], s[i + 1]);
  auto gamma_interp = std::make_shared<CubicHermite>(s, gam, gprime);
  double center = 0.0;
  if (const auto* lf = std::get_if<FiniteMeasure>(&lam)) {
    for (size_t i = 0; i < lf->size(); ++i)
      center += lf->weights()[i] * (*gamma_interp)(lf->support()[i]);
  } else if (std::holds_alternative<StandardNormal>(lam)) {
    static const QuadRule gh = gauss_hermite_prob(128);
    for (size_t i = 0; i < gh.nodes.size(); ++i)
      center += gh.weights[i] * (*gamma_interp)(gh.nodes[i]);
  } else {
    const auto& ld = std::get<DensityMeasure>(lam);
    static const QuadRule gl8 = gauss_legendre(8);
    for (size_t i = 0; i + 1 < ld.knots().size(); ++i)
      center += integrate_mapped(gl8, [&](double t) { return (*gamma_interp)(t)*ld.density(t); },
                                 ld.knots()[i], ld.knots()[i + 1]);
  }
  auto psi = [gamma_interp, center](double t) { return (*gamma_interp)(t)-center; };
  auto psi_prime = [gamma_interp](double t) { return gamma_interp->derivative(t); };
  return TransportPotential::smooth(psi, psi_prime);
}

inline TransportPotential fenchel(const TransportPotential& p) { return p.fenchel(); }

inline std::array<double, 2> subgradient(const TransportPotential& p, double s) {
  return p.subgradient(s);
}

// ---------------------------------------------------------------------------
// JointLaw

// Law of (L, phi_nu(L)) for L ~ mu and finite nu: per atom s_i the segment
// [l_{i-1}, l_i] of mu-quantiles carrying mass w_i.
struct JointSegment {
  double s;
  double ell_lo, ell_hi;
  double mass;
};

struct JointLaw {
  std::vector<JointSegment> segments;

  double max_mass_error(const DensityMeasure& mu) const {
    double e = 0.0;
    for (const auto& seg : segments)
      e = std::max(e, std::fabs(seg.mass - (mu.cdf(seg.ell_hi) - mu.cdf(seg.ell_lo))));
    return e;
  }
};

inline JointLaw joint_law(const DensityMeasure& mu, const FiniteMeasure& nu) {
  JointLaw j;
  double lo = mu.quantile(0.0);
  for (size_t i = 0; i < nu.size(); ++i) {
    const double hi = mu.quantile(nu.cum()[i]);
    j.segments.push_back({nu.support()[i], lo, hi, nu.weights()[i]});
    lo = hi;
  }
  return j;
}

}  // namespace cmmv
