#pragma once

// Strategy representations and exact pricing for the n-stage game.  A pure
// strategy of the uninformed side is the centered transfer X(omega); the
// posted prices are p_q = sqrt(n) E[u_q X | u_1..u_{q-1}], computed either by
// backward induction on raw histories or through
//   chi(x) = (sqrt(n)/2) (Psi(x + 1/sqrt(n)) - Psi(x - 1/sqrt(n)))
// on the S_{n-1} lattice.  Prices depend on the history only through S_{q-1}.

#include <bit>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cmmv/equilibrium.hpp"
#include "cmmv/measures.hpp"
#include "cmmv/transport.hpp"

namespace cmmv {

namespace detail {

inline void check_enumerable(int n, const char* who) {
  if (n < 1 || n > 24) throw std::domain_error(std::string(who) + ": n outside [1,24]");
}

inline double s_value(int n, int ups, int steps) {
  return (2.0 * ups - steps) / std::sqrt(static_cast<double>(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// StrategyTransfer

// X on {-1,+1}^n, indexed by bits (bit q-1 set means u_q = +1).
// Membership in the strategy space requires E_{lambda_n}[X] = 0.
struct StrategyTransfer {
  int n = 0;
  std::vector<double> values;

  StrategyTransfer(int n_, std::vector<double> v) : n(n_), values(std::move(v)) {
    detail::check_enumerable(n, "StrategyTransfer");
    if (values.size() != (size_t{1} << n)) throw std::invalid_argument("StrategyTransfer: size");
    double m = 0.0;
    for (double x : values) m += x;
    m /= static_cast<double>(values.size());
    if (std::fabs(m) > 1e-12)
      throw std::domain_error("StrategyTransfer: E_lambda[X] != 0 (not in the strategy space)");
  }

  double s_n(uint32_t omega) const {
    return detail::s_value(n, std::popcount(omega), n);
  }
};

inline StrategyTransfer x_from_psi(const TransportPotential& psi, int n) {
  detail::check_enumerable(n, "x_from_psi");
  std::vector<double> by_ups(n + 1);
  for (int k = 0; k <= n; ++k) by_ups[k] = psi(detail::s_value(n, k, n));
  std::vector<double> v(size_t{1} << n);
  for (uint32_t w = 0; w < v.size(); ++w) v[w] = by_ups[std::popcount(w)];
  return StrategyTransfer(n, std::move(v));
}

// ---------------------------------------------------------------------------
// PriceTree

// prices[q-1][j] = p_q at the node S_{q-1} = (2j-(q-1))/sqrt(n), j = 0..q-1.
struct PriceTree {
  int n = 0;
  std::vector<std::vector<double>> prices;
  std::vector<double> chi;  // chi on the S_{n-1} grid (j = 0..n-1)

  double node(int q, int j) const { return prices.at(q - 1).at(j); }
  double s_at(int q, int j) const { return detail::s_value(n, j, q - 1); }

  void write_csv(std::ostream& os) const {
    os << "q,s,price\n";
    char buf[80];
    for (int q = 1; q <= n; ++q)
      for (int j = 0; j < q; ++j) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", q, s_at(q, j), node(q, j));
        os << buf;
      }
  }
};

// Exact tree through the chi table; O(n^2).
inline PriceTree price_tree_from_psi(const TransportPotential& psi, int n) {
  if (n < 1) throw std::domain_error("price_tree_from_psi: n >= 1 required");
  PriceTree tree;
  tree.n = n;
  const double rn = std::sqrt(static_cast<double>(n));
  std::vector<double> psi_at(n + 1);
  for (int k = 0; k <= n; ++k) psi_at[k] = psi(detail::s_value(n, k, n));
  tree.chi.resize(n);
  for (int j = 0; j < n; ++j) tree.chi[j] = 0.5 * rn * (psi_at[j + 1] - psi_at[j]);
  tree.prices.assign(n, {});
  tree.prices[n - 1] = tree.chi;
  for (int q = n - 1; q >= 1; --q) {
    tree.prices[q - 1].resize(q);
    for (int j = 0; j < q; ++j)
      tree.prices[q - 1][j] = 0.5 * (tree.prices[q][j + 1] + tree.prices[q][j]);
  }
  return tree;
}

// Backward induction on raw histories; verifies that the result depends on
// the history only through S_{q-1} before collapsing to lattice nodes.
inline PriceTree strategy_from_x(const StrategyTransfer& x, double collapse_tol = 1e-12) {
  const int n = x.n;
  const double rn = std::sqrt(static_cast<double>(n));
  PriceTree tree;
  tree.n = n;
  tree.prices.assign(n, {});
  std::vector<double> cur = x.values;  // X^k on k-bit histories
  for (int k = n; k >= 1; --k) {
    const size_t half = size_t{1} << (k - 1);
    const uint32_t bit = uint32_t{1} << (k - 1);
    std::vector<double> nodes(k, 0.0);
    std::vector<bool> seen(k, false);
    for (uint32_t h = 0; h < half; ++h) {
      const double up = cur[h | bit], down = cur[h];
      const double price = 0.5 * rn * (up - down);
      const int j = std::popcount(h);
      if (!seen[j]) {
        nodes[j] = price;
        seen[j] = true;
      } else if (std::fabs(nodes[j] - price) > collapse_tol) {
        throw std::domain_error("strategy_from_x: prices are not S-measurable");
      }
      cur[h] = 0.5 * (up + down);
    }
    cur.resize(half);
    tree.prices[k - 1] = std::move(nodes);
  }
  tree.chi = tree.prices[n - 1];
  return tree;
}

// max over interior nodes of |(p_up + p_down)/2 - p|
inline double martingale_check(const PriceTree& tree) {
  double r = 0.0;
  for (int q = 1; q < tree.n; ++q)
    for (int j = 0; j < q; ++j)
      r = std::max(r, std::fabs(0.5 * (tree.node(q + 1, j + 1) + tree.node(q + 1, j)) -
                                tree.node(q, j)));
  return r;
}

inline double min_price_gap(const PriceTree& tree) {
  double g = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= tree.n; ++q)
    for (int j = 0; j + 1 < q; ++j) g = std::min(g, tree.node(q, j + 1) - tree.node(q, j));
  return g;
}

// Per interior node, the up-probability q+ solving
//   q+ p_{q+1}(s+) + (1-q+) p_{q+1}(s-) = p_q(s).
// Degenerate spreads (c_q <= tol) are rejected.
inline std::vector<std::vector<double>> unique_equivalent_measure(const PriceTree& tree,
                                                                  double tol = 1e-12) {
  std::vector<std::vector<double>> q_up(tree.n - 1);
  for (int q = 1; q < tree.n; ++q) {
    q_up[q - 1].resize(q);
    for (int j = 0; j < q; ++j) {
      const double up = tree.node(q + 1, j + 1), down = tree.node(q + 1, j);
      if (0.5 * (up - down) <= tol)
        throw std::domain_error("unique_equivalent_measure: degenerate node, price spread <= tol");
      q_up[q - 1][j] = (tree.node(q, j) - down) / (up - down);
    }
  }
  return q_up;
}

// ---------------------------------------------------------------------------
// HistoricalLaw

// Equilibrium law of play: S_n-atom drawn from nu, history uniform among the
// C(n,k) paths reaching it, L from mu restricted to the atom's segment.
struct HistoricalAtom {
  double s;
  int ups;
  double nu_weight;
  double ell_lo, ell_hi;
  double omega_weight;  // probability of each single history in the class
};

struct HistoricalLaw {
  int n = 0;
  std::vector<HistoricalAtom> atoms;

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& a : atoms)
      arr.push_back({{"s", a.s},
                     {"ups", a.ups},
                     {"nu_weight", a.nu_weight},
                     {"segment", {a.ell_lo, a.ell_hi}},
                     {"omega_weight", a.omega_weight}});
    return nlohmann::json{{"n", n}, {"atoms", arr}};
  }
};

inline double binomial_coefficient(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

inline HistoricalLaw historical_law(const EquilibriumSolution& sol, const DensityMeasure& mu) {
  HistoricalLaw law;
  law.n = sol.n;
  const JointLaw jl = joint_law(mu, sol.nu);
  for (size_t i = 0; i < jl.segments.size(); ++i) {
    const auto& seg = jl.segments[i];
    HistoricalAtom a;
    a.s = seg.s;
    a.ups = static_cast<int>(i);
    a.nu_weight = seg.mass;
    a.ell_lo = seg.ell_lo;
    a.ell_hi = seg.ell_hi;
    a.omega_weight = seg.mass / binomial_coefficient(sol.n, a.ups);
    law.atoms.push_back(a);
  }
  return law;
}

// ---------------------------------------------------------------------------
// Payoffs

namespace detail {

// conditional moments of L on a segment of mu
inline double segment_mean(const DensityMeasure& mu, double lo, double hi) {
  if (!(hi > lo)) return lo;
  static const QuadRule gl = gauss_legendre(32);
  const double num = integrate_mapped(gl, [&](double l) { return l * mu.density(l); }, lo, hi);
  const double den = integrate_mapped(gl, [&](double l) { return mu.density(l); }, lo, hi);
  return num / den;
}

template <typename F>
double segment_expect(const DensityMeasure& mu, double lo, double hi, F&& f) {
  if (!(hi > lo)) return f(lo);
  static const QuadRule gl = gauss_legendre(32);
  const double num =
      integrate_mapped(gl, [&](double l) { return f(l) * mu.density(l); }, lo, hi);
  const double den = integrate_mapped(gl, [&](double l) { return mu.density(l); }, lo, hi);
  return num / den;
}

// (1/sqrt(n)) sum_q u_q p_q along the path of omega
inline double path_transfer(const PriceTree& tree, uint32_t omega) {
  const int n = tree.n;
  double acc = 0.0;
  int ups = 0;
  for (int q = 1; q <= n; ++q) {
    const int u = (omega >> (q - 1)) & 1u ? 1 : -1;
    acc += u * tree.node(q, ups);
    if (u > 0) ++ups;
  }
  return acc / std::sqrt(static_cast<double>(n));
}

}  // namespace detail

// Exact expected payoff of the informed player under the historical law.
inline double payoff_g1(const HistoricalLaw& law, const DensityMeasure& mu, const PriceTree& tree) {
  if (law.n != tree.n) throw std::invalid_argument("payoff_g1: inconsistent n");
  detail::check_enumerable(tree.n, "payoff_g1");
  double acc = 0.0;
  for (const auto& a : law.atoms)
    acc += a.nu_weight * detail::segment_mean(mu, a.ell_lo, a.ell_hi) * a.s;
  const uint32_t count = uint32_t{1} << tree.n;
  for (uint32_t w = 0; w < count; ++w) {
    const auto& a = law.atoms[std::popcount(w)];
    acc -= a.omega_weight * detail::path_transfer(tree, w);
  }
  return acc;
}

// Exact expected utility of the market maker under the historical law.
inline double payoff_g2(const HistoricalLaw& law, const DensityMeasure& mu, const PriceTree& tree,
                        const RiskFunction& H) {
  if (law.n != tree.n) throw std::invalid_argument("payoff_g2: inconsistent n");
  detail::check_enumerable(tree.n, "payoff_g2");
  double acc = 0.0;
  const uint32_t count = uint32_t{1} << tree.n;
  for (uint32_t w = 0; w < count; ++w) {
    const auto& a = law.atoms[std::popcount(w)];
    const double transfer = detail::path_transfer(tree, w);
    acc += a.omega_weight * detail::segment_expect(mu, a.ell_lo, a.ell_hi, [&](double ell) {
      return H.value(ell * a.s - transfer);
    });
  }
  return acc;
}

// Sample-set overloads: empirical averages over explicit (omega, L) draws.
struct OmegaSample {
  std::vector<int> u;  // entries +/-1
  double L;
};

namespace detail {

inline double sample_transfer(const PriceTree& tree, const std::vector<int>& u) {
  double acc = 0.0;
  int ups = 0;
  for (int q = 1; q <= tree.n; ++q) {
    acc += u[q - 1] * tree.node(q, ups);
    if (u[q - 1] > 0) ++ups;
  }
  return acc / std::sqrt(static_cast<double>(tree.n));
}

}  // namespace detail

inline double payoff_g1(const std::vector<OmegaSample>& samples, const PriceTree& tree) {
  double acc = 0.0;
  for (const auto& smp : samples) {
    double s = 0.0;
    for (int v : smp.u) s += v;
    s /= std::sqrt(static_cast<double>(tree.n));
    acc += smp.L * s - detail::sample_transfer(tree, smp.u);
  }
  return acc / samples.size();
}

inline double payoff_g2(const std::vector<OmegaSample>& samples, const PriceTree& tree,
                        const RiskFunction& H) {
  double acc = 0.0;
  for (const auto& smp : samples) {
    double s = 0.0;
    for (int v : smp.u) s += v;
    s /= std::sqrt(static_cast<double>(tree.n));
    acc += H.value(smp.L * s - detail::sample_transfer(tree, smp.u));
  }
  return acc / samples.size();
}

// ---------------------------------------------------------------------------
// Brute-force epsilon-Nash certification (n <= 4)

struct NashSlack {
  double informed;    // player 1 best-response gap over the L-grid
  double market;      // player 2 first-order-condition slack over the Walsh basis
};

inline NashSlack epsilon_nash_bruteforce(int mu_grid_size, int n, const EquilibriumSolution& sol,
                                         const DensityMeasure& mu, const RiskFunction& H,
                                         const StrategyTransfer* override_x = nullptr) {
  if (n > 4) throw std::domain_error("epsilon_nash_bruteforce: n > 4 rejected");
  if (n != sol.n) throw std::invalid_argument("epsilon_nash_bruteforce: n mismatch");
  const StrategyTransfer x = override_x ? *override_x : x_from_psi(sol.psi, n);
  const JointLaw jl = joint_law(mu, sol.nu);
  const uint32_t count = uint32_t{1} << n;

  // mean X per S_n class (the C3 selection draws omega uniformly in a class)
  std::vector<double> class_x(n + 1, 0.0), class_count(n + 1, 0.0);
  for (uint32_t w = 0; w < count; ++w) {
    class_x[std::popcount(w)] += x.values[w];
    class_count[std::popcount(w)] += 1.0;
  }
  for (int k = 0; k <= n; ++k) class_x[k] /= class_count[k];

  // informed player: gap between the best class and the equilibrium selection
  std::vector<double> grid;
  for (int i = 0; i < mu_grid_size; ++i) grid.push_back((i + 0.5) / mu_grid_size);
  for (const auto& seg : jl.segments) {
    grid.push_back(seg.ell_lo);
    grid.push_back(seg.ell_hi);
  }
  double eps1 = 0.0;
  for (double ell : grid) {
    if (!(ell >= mu.a() && ell <= mu.b())) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (uint32_t w = 0; w < count; ++w)
      best = std::max(best, ell * x.s_n(w) - x.values[w]);
    const double s_star = phi_map(mu, Measure1D(sol.nu), std::min(ell, mu.b()));
    int k_star = 0;
    for (size_t i = 0; i < jl.segments.size(); ++i)
      if (jl.segments[i].s == s_star) k_star = static_cast<int>(i);
    const double achieved = ell * s_star - class_x[k_star];
    eps1 = std::max(eps1, best - achieved);
  }

  // market maker: |E_Pi[H'(LS - X) delta]| over the Walsh basis of the
  // centered strategy space
  std::vector<double> weighted(count);
  for (uint32_t w = 0; w < count; ++w) {
    const auto& seg = jl.segments[std::popcount(w)];
    const double omega_weight = seg.mass / class_count[std::popcount(w)];
    const double y = detail::segment_expect(mu, seg.ell_lo, seg.ell_hi, [&](double ell) {
      return H.prime(ell * seg.s - x.values[w]);
    });
    weighted[w] = omega_weight * y;
  }
  double eps2 = 0.0;
  for (uint32_t mask = 1; mask < count; ++mask) {
    double acc = 0.0;
    for (uint32_t w = 0; w < count; ++w) {
      const int sign = (std::popcount(w & mask) & 1) ? -1 : 1;  // Walsh character
      acc += sign * weighted[w];
    }
    eps2 = std::max(eps2, std::fabs(acc));
  }
  return {eps1, eps2};
}

}  // namespace cmmv
