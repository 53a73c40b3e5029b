#pragma once

// The operator T_lambda on finite measures and the damped fixed-point solver
// for T_{lambda_n}(nu) = lambda_n.  Per atom,
//   Y(s_i) = E[H'(L s_i - Psi(s_i)) | L in segment_i],
// T(nu) has weights proportional to w_i Y(s_i), and alpha = 1/E_nu[Y] is the
// normalizer.  Equilibria are verified through the (C1)-(C4') slacks.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmmv/measures.hpp"
#include "cmmv/transport.hpp"

namespace cmmv {

struct SolverConfig {
  double damping = 0.5;        // Picard damping eta, halved on residual increase
  double tol = 1e-10;          // max per-atom weight residual
  // W2 between same-support atomic laws floors at sqrt(machine eps) ~ 7e-9,
  // so the W2 residual carries its own tolerance.
  double tol_w2 = 1e-8;
  int max_iterations = 2000;
  int quad_order = 32;         // Gauss-Legendre order per segment
  double quad_tol = 1e-12;     // adaptive bisection fallback threshold
  bool check_sensitivity = false;
};

class solver_error : public std::runtime_error {
 public:
  solver_error(const std::string& what, double residual_w2, double residual_weights, int iterations)
      : std::runtime_error(what + " (residual_w2=" + std::to_string(residual_w2) +
                           ", residual_weights=" + std::to_string(residual_weights) +
                           ", iterations=" + std::to_string(iterations) + ")"),
        residual_w2(residual_w2),
        residual_weights(residual_weights),
        iterations(iterations) {}

  double residual_w2;
  double residual_weights;
  int iterations;
};

struct EquilibriumSolution {
  int n = 0;  // stage count; 0 for grid discretizations of the limit
  FiniteMeasure nu{{0.0}, {1.0}};
  TransportPotential psi{{0.0}, {0.0, 0.0}, 0.0};
  double alpha = 1.0;
  double residual_w2 = 0.0;
  double residual_weights = 0.0;
  int iterations = 0;
  double sensitivity_w2 = -1.0;  // W2 gap of a jittered restart; -1 = not checked
};

namespace detail {

template <typename F>
double segment_integral(const QuadRule& rule, F&& f, double a, double b, double tol, int depth) {
  const double whole = integrate_mapped(rule, f, a, b);
  const double mid = 0.5 * (a + b);
  const double halves = integrate_mapped(rule, f, a, mid) + integrate_mapped(rule, f, mid, b);
  if (depth <= 0 || std::fabs(halves - whole) <= tol) return halves;
  return segment_integral(rule, f, a, mid, 0.5 * tol, depth - 1) +
         segment_integral(rule, f, mid, b, 0.5 * tol, depth - 1);
}

inline std::vector<double> psi_at_atoms(const TransportPotential& psi, const FiniteMeasure& nu) {
  std::vector<double> v(nu.size());
  for (size_t i = 0; i < nu.size(); ++i) v[i] = psi(nu.support()[i]);
  return v;
}

}  // namespace detail

// Per-atom conditional expectation of H' along the monotone coupling.
// Values lie in (eps, K).
inline std::vector<double> y_field(const DensityMeasure& mu, const FiniteMeasure& nu,
                                   const Measure1D& lam, const RiskFunction& H,
                                   const SolverConfig& cfg = {}) {
  const JointLaw jl = joint_law(mu, nu);
  const TransportPotential psi = psi_potential(mu, Measure1D(nu), lam);
  const QuadRule rule = gauss_legendre(cfg.quad_order);
  std::vector<double> y(nu.size());
  for (size_t i = 0; i < nu.size(); ++i) {
    const auto& seg = jl.segments[i];
    if (!(seg.mass > 0.0)) throw std::domain_error("y_field: zero-mass atom");
    const double s = seg.s;
    const double psi_s = psi(s);
    if (!(seg.ell_hi > seg.ell_lo)) {
      y[i] = H.prime(seg.ell_lo * s - psi_s);  // segment collapsed in fp
      continue;
    }
    auto num = [&](double ell) { return H.prime(ell * s - psi_s) * mu.density(ell); };
    auto den = [&](double ell) { return mu.density(ell); };
    const double a = detail::segment_integral(rule, num, seg.ell_lo, seg.ell_hi, cfg.quad_tol, 20);
    const double b = detail::segment_integral(rule, den, seg.ell_lo, seg.ell_hi, cfg.quad_tol, 20);
    y[i] = a / b;
  }
  return y;
}

// T_lambda(nu) = alpha . Y . nu: same support, reweighted and renormalized.
inline FiniteMeasure apply_T(const DensityMeasure& mu, const FiniteMeasure& nu,
                             const Measure1D& lam, const RiskFunction& H,
                             const SolverConfig& cfg = {}) {
  const std::vector<double> y = y_field(mu, nu, lam, H, cfg);
  std::vector<double> w(nu.size());
  double tot = 0.0;
  for (size_t i = 0; i < nu.size(); ++i) {
    w[i] = nu.weights()[i] * y[i];
    tot += w[i];
  }
  for (double& v : w) v /= tot;
  return FiniteMeasure(nu.support(), w);
}

namespace detail {

// Damped Picard iteration with a given finite target lambda; shared by the
// n-stage solver and the grid discretization of the limit.
inline EquilibriumSolution solve_against_target(const DensityMeasure& mu,
                                                const FiniteMeasure& target,
                                                const RiskFunction& H, const SolverConfig& cfg,
                                                const std::vector<double>* init_weights = nullptr) {
  const Measure1D lam(target);
  const std::vector<double>& b = target.weights();
  FiniteMeasure nu = init_weights ? FiniteMeasure(target.support(), *init_weights) : target;

  double eta = cfg.damping;
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("solver: damping outside (0,1]");
  double prev_res = std::numeric_limits<double>::infinity();
  double res_w2 = 0.0, res_w = 0.0, alpha = 1.0;
  std::vector<double> y;

  int it = 0;
  for (;; ++it) {
    y = y_field(mu, nu, lam, H, cfg);
    double ey = 0.0;
    for (size_t i = 0; i < nu.size(); ++i) ey += nu.weights()[i] * y[i];
    alpha = 1.0 / ey;

    std::vector<double> tw(nu.size());
    res_w = 0.0;
    for (size_t i = 0; i < nu.size(); ++i) {
      tw[i] = alpha * y[i] * nu.weights()[i];
      res_w = std::max(res_w, std::fabs(tw[i] - b[i]));
    }
    res_w2 = wasserstein2(Measure1D(FiniteMeasure(nu.support(), tw)), lam);
    if (res_w < cfg.tol && res_w2 < cfg.tol_w2) break;
    if (it >= cfg.max_iterations)
      throw solver_error("fixed-point iteration did not converge", res_w2, res_w, it);
    const double res = std::max(res_w2 / cfg.tol_w2, res_w / cfg.tol);
    if (res > prev_res) eta = std::max(0.5 * eta, 1.0 / 1024.0);
    prev_res = res;

    std::vector<double> w(nu.size());
    double tot = 0.0;
    for (size_t i = 0; i < nu.size(); ++i) {
      w[i] = (1.0 - eta) * nu.weights()[i] + eta * b[i] / (alpha * y[i]);
      tot += w[i];
    }
    for (double& v : w) v /= tot;
    nu = FiniteMeasure(nu.support(), w);
  }

  EquilibriumSolution sol;
  sol.nu = nu;
  sol.psi = psi_potential(mu, Measure1D(nu), lam);
  sol.alpha = alpha;
  sol.residual_w2 = res_w2;
  sol.residual_weights = res_w;
  sol.iterations = it;
  return sol;
}

}  // namespace detail

// Solve T_{lambda_n}(nu) = lambda_n for the n-stage game.
inline EquilibriumSolution solve_fixed_point(const DensityMeasure& mu, int n,
                                             const RiskFunction& H, const SolverConfig& cfg = {}) {
  if (n < 1) throw std::domain_error("solve_fixed_point: n >= 1 required");
  const FiniteMeasure target = binomial_step_law(n);
  EquilibriumSolution sol = detail::solve_against_target(mu, target, H, cfg);
  sol.n = n;

  if (cfg.check_sensitivity) {
    std::vector<double> w = sol.nu.weights();
    double tot = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      w[i] *= 1.0 + 0.1 * std::sin(11.0 * (i + 1.0));
      tot += w[i];
    }
    for (double& v : w) v /= tot;
    EquilibriumSolution alt = detail::solve_against_target(mu, target, H, cfg, &w);
    sol.sensitivity_w2 = wasserstein2(Measure1D(sol.nu), Measure1D(alt.nu));
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Condition verification

struct ConditionReport {
  double c1_centering = 0.0;  // |E_lambda[Psi]|
  double c2_marginal = 0.0;   // max segment-mass error against mu
  double c3_sandwich = 0.0;   // max violation of gamma(s-) <= L <= gamma(s)
  double c4_balance = 0.0;    // max_i |alpha Y_i w_i - b_i|

  double max_slack() const {
    return std::max(std::max(c1_centering, c2_marginal), std::max(c3_sandwich, c4_balance));
  }
  bool pass(double tol) const { return max_slack() < tol; }
};

inline ConditionReport verify_conditions(const EquilibriumSolution& sol, const DensityMeasure& mu,
                                         const RiskFunction& H, const SolverConfig& cfg = {}) {
  ConditionReport rep;
  const FiniteMeasure target = binomial_step_law(sol.n);
  const Measure1D lam(target);

  rep.c1_centering = std::fabs(detail::expect_pl(sol.psi, lam));
  rep.c2_marginal = joint_law(mu, sol.nu).max_mass_error(mu);

  const int grid = 1000;
  for (int i = 0; i < grid; ++i) {
    const double ell = (i + 0.5) / grid;
    const double s = phi_map(mu, Measure1D(sol.nu), ell);
    const auto sg = sol.psi.subgradient(s);
    rep.c3_sandwich = std::max(rep.c3_sandwich, std::max(sg[0] - ell, ell - sg[1]));
  }
  rep.c3_sandwich = std::max(rep.c3_sandwich, 0.0);

  const std::vector<double> y = y_field(mu, sol.nu, lam, H, cfg);
  double ey = 0.0;
  for (size_t i = 0; i < sol.nu.size(); ++i) ey += sol.nu.weights()[i] * y[i];
  const double alpha = 1.0 / ey;
  for (size_t i = 0; i < sol.nu.size(); ++i)
    rep.c4_balance = std::max(rep.c4_balance,
                              std::fabs(alpha * y[i] * sol.nu.weights()[i] - target.weights()[i]));
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json solution_to_json(const EquilibriumSolution& sol) {
  nlohmann::json j;
  j["n"] = sol.n;
  j["support"] = sol.nu.support();
  j["weights"] = sol.nu.weights();
  j["psi"] = sol.psi.to_json();
  j["alpha"] = sol.alpha;
  j["residuals"] = {{"w2", sol.residual_w2}, {"weights", sol.residual_weights}};
  j["iterations"] = sol.iterations;
  if (sol.sensitivity_w2 >= 0.0) j["sensitivity_w2"] = sol.sensitivity_w2;
  return j;
}

inline EquilibriumSolution solution_from_json(const nlohmann::json& j) {
  EquilibriumSolution sol;
  sol.n = j.at("n").get<int>();
  sol.nu = FiniteMeasure(j.at("support").get<std::vector<double>>(),
                         j.at("weights").get<std::vector<double>>());
  sol.psi = TransportPotential::from_json(j.at("psi"));
  sol.alpha = j.at("alpha").get<double>();
  sol.residual_w2 = j.at("residuals").at("w2").get<double>();
  sol.residual_weights = j.at("residuals").at("weights").get<double>();
  sol.iterations = j.at("iterations").get<int>();
  sol.sensitivity_w2 = j.value("sensitivity_w2", -1.0);
  return sol;
}

}  // namespace cmmv
