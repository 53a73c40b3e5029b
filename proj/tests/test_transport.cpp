#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cmmv/rng.hpp"
#include "cmmv/transport.hpp"

using namespace cmmv;

namespace {

const DensityMeasure kUniform = DensityMeasure::uniform();

FiniteMeasure random_finite(std::mt19937& gen, int max_atoms = 6) {
  std::uniform_int_distribution<int> nd(1, max_atoms);
  std::uniform_real_distribution<double> xd(-2.5, 2.5), wd(0.05, 1.0);
  const int m = nd(gen);
  std::vector<double> s, w;
  double prev = xd(gen);
  for (int i = 0; i < m; ++i) {
    s.push_back(prev);
    prev += 0.05 + std::fabs(xd(gen));
    w.push_back(wd(gen));
  }
  double tot = 0.0;
  for (double v : w) tot += v;
  for (double& v : w) v /= tot;
  return FiniteMeasure(s, w);
}

TransportPotential random_pl_potential(std::mt19937& gen) {
  std::uniform_int_distribution<int> nd(1, 6);
  std::uniform_real_distribution<double> xd(-2.0, 2.0), od(-1.0, 1.0), ud(0.0, 1.0);
  const int m = nd(gen);
  std::vector<double> b;
  double prev = xd(gen);
  for (int i = 0; i < m; ++i) {
    b.push_back(prev);
    prev += 0.1 + std::fabs(xd(gen));
  }
  std::vector<double> raw(m + 1);
  for (double& v : raw) v = ud(gen);
  std::sort(raw.begin(), raw.end());
  return TransportPotential(b, raw, od(gen));
}

}  // namespace

TEST_CASE("phi map") {
  Measure1D b1 = binomial_step_law(1);
  CHECK(phi_map(kUniform, b1, 0.3) == -1.0);
  CHECK(phi_map(kUniform, b1, 0.5) == 1.0);  // strict inequality in the right inverse
  CHECK(phi_map(kUniform, StandardNormal{}, 0.5) == Catch::Approx(0.0).margin(1e-12));
  // nondecreasing in ell
  double prev = -1e9;
  for (int i = 0; i <= 40; ++i) {
    const double v = phi_map(kUniform, b1, i / 40.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("gamma map") {
  Measure1D b1 = binomial_step_law(1);
  CHECK(gamma_map(kUniform, b1, 0.0) == Catch::Approx(0.5));
  CHECK(gamma_map(kUniform, b1, -2.0) == 0.0);
  for (double s : {-1.5, -0.3, 0.0, 0.9, 2.1})
    CHECK(gamma_map(kUniform, StandardNormal{}, s) == Catch::Approx(normal_cdf(s)).margin(1e-12));
}

TEST_CASE("big gamma") {
  Measure1D b1 = binomial_step_law(1);
  CHECK(big_gamma(kUniform, b1, 1.0) == Catch::Approx(0.5));
  CHECK(big_gamma(kUniform, b1, -1.0) == Catch::Approx(-0.5));
  CHECK(big_gamma(kUniform, b1, 0.0) == 0.0);
  Measure1D b2 = binomial_step_law(2);
  CHECK(big_gamma(kUniform, b2, std::sqrt(2.0)) == Catch::Approx(3.0 * std::sqrt(2.0) / 4.0));
  // quadrature route against the normal: Gamma(s) = int_0^s Phi(t) dt = s Phi(s) + phi(s) - phi(0)
  for (double s : {-1.0, 0.5, 2.0}) {
    const double exact = s * normal_cdf(s) + normal_pdf(s) - normal_pdf(0.0);
    CHECK(big_gamma(kUniform, StandardNormal{}, s) == Catch::Approx(exact).margin(1e-9));
  }
}

TEST_CASE("big phi") {
  Measure1D b1 = binomial_step_law(1);
  CHECK(big_phi(kUniform, b1, 0.5) == Catch::Approx(-0.5));
  CHECK(big_phi(kUniform, b1, 1.0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(big_phi(kUniform, Measure1D(FiniteMeasure({0.7}, {1.0})), 0.9) == Catch::Approx(0.63));
}

TEST_CASE("psi potential centering") {
  Measure1D b1 = binomial_step_law(1);
  TransportPotential p1 = psi_potential(kUniform, b1, b1);
  CHECK(p1(1.0) == Catch::Approx(0.5));
  CHECK(p1(-1.0) == Catch::Approx(-0.5));
  CHECK(p1.offset() == Catch::Approx(0.0).margin(1e-15));

  Measure1D b2 = binomial_step_law(2);
  TransportPotential p2 = psi_potential(kUniform, b2, b2);
  CHECK(p2.offset() == Catch::Approx(-std::sqrt(2.0) / 8.0));
  CHECK(p2(std::sqrt(2.0)) == Catch::Approx(5.0 * std::sqrt(2.0) / 8.0));
  CHECK(p2(0.0) == Catch::Approx(-std::sqrt(2.0) / 8.0));

  // E_lambda[Psi] = 0 for random nu, lambda
  std::mt19937 gen(11);
  for (int t = 0; t < 20; ++t) {
    FiniteMeasure nu = random_finite(gen), lam = random_finite(gen);
    TransportPotential p = psi_potential(kUniform, Measure1D(nu), Measure1D(lam));
    double e = 0.0;
    for (size_t i = 0; i < lam.size(); ++i) e += lam.weights()[i] * p(lam.support()[i]);
    CHECK(std::fabs(e) < 1e-12);
  }

  // normal lambda: centering checked against an independent Simpson integral
  FiniteMeasure nu = random_finite(gen);
  TransportPotential p = psi_potential(kUniform, Measure1D(nu), Measure1D(StandardNormal{}));
  const double e = adaptive_simpson([&](double z) { return p(z) * normal_pdf(z); }, -12.0, 12.0, 1e-12);
  CHECK(std::fabs(e) < 1e-9);
}

TEST_CASE("fenchel conjugate") {
  // line through the origin with slope 1/2: conjugate is 0 at x = 1/2, +inf away
  TransportPotential line({0.0}, {0.5, 0.5}, 0.0);
  TransportPotential conj = line.fenchel();
  CHECK(conj(0.5) == Catch::Approx(0.0).margin(1e-15));
  CHECK(std::isinf(conj(0.4)));

  std::mt19937 gen(23);
  for (int t = 0; t < 25; ++t) {
    TransportPotential p = random_pl_potential(gen);
    TransportPotential pp = p.fenchel().fenchel();
    for (int i = 0; i <= 60; ++i) {
      const double s = -4.0 + i * (8.0 / 60.0);
      CHECK(pp(s) == Catch::Approx(p(s)).margin(1e-12));
    }
  }

  // Fenchel inequality with equality exactly on the subgradient
  for (int t = 0; t < 10; ++t) {
    TransportPotential p = random_pl_potential(gen);
    TransportPotential q = p.fenchel();
    for (double s : p.breakpoints()) {
      auto sg = p.subgradient(s);
      for (double x : {sg[0], 0.5 * (sg[0] + sg[1]), sg[1]}) {
        CHECK(x * s - p(s) - q(x) == Catch::Approx(0.0).margin(1e-12));
      }
      const double below = sg[0] - 0.01, above = sg[1] + 0.01;
      if (below >= q.domain_lo()) CHECK(p(s) + q(below) - below * s > 1e-8);
      if (above <= q.domain_hi()) CHECK(p(s) + q(above) - above * s > 1e-8);
    }
  }
}

TEST_CASE("subgradient") {
  Measure1D b1 = binomial_step_law(1);
  TransportPotential p = psi_potential(kUniform, b1, b1);
  auto sg = p.subgradient(1.0);
  CHECK(sg[0] == Catch::Approx(0.5));
  CHECK(sg[1] == Catch::Approx(1.0));
  auto mid = p.subgradient(0.2);
  CHECK(mid[0] == mid[1]);
  CHECK(mid[0] == Catch::Approx(0.5));

  auto smooth = TransportPotential::smooth([](double s) { return 0.5 * s * s; },
                                           [](double s) { return s; });
  auto sg2 = smooth.subgradient(0.7);
  CHECK(sg2[0] == Catch::Approx(0.7));
  CHECK(sg2[0] == sg2[1]);
}

TEST_CASE("joint law basics") {
  JointLaw j = joint_law(kUniform, binomial_step_law(1));
  REQUIRE(j.segments.size() == 2);
  CHECK(j.segments[0].s == -1.0);
  CHECK(j.segments[0].ell_lo == Catch::Approx(0.0).margin(1e-12));
  CHECK(j.segments[0].ell_hi == Catch::Approx(0.5).margin(1e-12));
  CHECK(j.segments[0].mass == Catch::Approx(0.5));
  CHECK(j.segments[1].ell_hi == Catch::Approx(1.0).margin(1e-12));
  CHECK(j.max_mass_error(kUniform) < 1e-10);

  JointLaw single = joint_law(kUniform, FiniteMeasure({0.0}, {1.0}));
  REQUIRE(single.segments.size() == 1);
  CHECK(single.segments[0].ell_lo == Catch::Approx(0.0).margin(1e-12));
  CHECK(single.segments[0].ell_hi == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("pushforward of mu through phi matches nu (Monte Carlo)") {
  std::mt19937 gen(31);
  for (int trial = 0; trial < 3; ++trial) {
    FiniteMeasure nu = random_finite(gen);
    const int n_draws = 100000;
    CounterRng rng(422 + trial, 0);
    std::vector<double> counts(nu.size(), 0.0);
    for (int i = 0; i < n_draws; ++i) {
      const double ell = rng.next_u01();
      const double s = phi_map(kUniform, Measure1D(nu), ell);
      const auto it = std::lower_bound(nu.support().begin(), nu.support().end(), s - 1e-12);
      counts[static_cast<size_t>(it - nu.support().begin())] += 1.0;
    }
    std::vector<double> emp = counts;
    for (double& c : emp) c /= n_draws;
    // empirical atoms sit exactly on the support; keep only touched ones
    std::vector<double> es, ew;
    for (size_t i = 0; i < emp.size(); ++i)
      if (emp[i] > 0) {
        es.push_back(nu.support()[i]);
        ew.push_back(emp[i]);
      }
    const double dist = wasserstein2(Measure1D(FiniteMeasure(es, ew)), Measure1D(nu));

    // bootstrap noise: resample multinomially from the empirical law
    CounterRng brng(97 + trial, 1);
    std::vector<double> bdists;
    for (int b = 0; b < 30; ++b) {
      std::vector<double> bc(es.size(), 0.0);
      for (int i = 0; i < n_draws; ++i) {
        double u = brng.next_u01(), acc = 0.0;
        for (size_t k = 0; k < ew.size(); ++k) {
          acc += ew[k];
          if (u <= acc || k + 1 == ew.size()) {
            bc[k] += 1.0;
            break;
          }
        }
      }
      std::vector<double> bs, bw;
      for (size_t k = 0; k < bc.size(); ++k)
        if (bc[k] > 0) {
          bs.push_back(es[k]);
          bw.push_back(bc[k] / n_draws);
        }
      bdists.push_back(wasserstein2(Measure1D(FiniteMeasure(bs, bw)), Measure1D(FiniteMeasure(es, ew))));
    }
    double bm = 0.0, bv = 0.0;
    for (double d : bdists) bm += d;
    bm /= bdists.size();
    for (double d : bdists) bv += (d - bm) * (d - bm);
    const double bsd = std::sqrt(bv / (bdists.size() - 1));
    CHECK(dist <= bm + 3.0 * bsd);
  }
}

TEST_CASE("sandwich: gamma(phi(L)-) <= L <= gamma(phi(L))") {
  std::mt19937 gen(47);
  for (int trial = 0; trial < 10; ++trial) {
    FiniteMeasure nu = random_finite(gen);
    Measure1D nm(nu);
    TransportPotential gamma_pot = psi_potential(kUniform, nm, Measure1D(FiniteMeasure({0.0}, {1.0})));
    for (int i = 0; i <= 200; ++i) {
      const double ell = (i + 0.5) / 201.0;
      const double s = phi_map(kUniform, nm, ell);
      auto sg = gamma_pot.subgradient(s);  // [gamma(s-), gamma(s)]
      CHECK(sg[0] <= ell + 1e-12);
      CHECK(ell <= sg[1] + 1e-12);
    }
  }
}

TEST_CASE("Gamma is 1-Lipschitz and W2-continuous in nu") {
  std::mt19937 gen(53);
  for (int trial = 0; trial < 10; ++trial) {
    FiniteMeasure nu1 = random_finite(gen), nu2 = random_finite(gen);
    Measure1D m1(nu1), m2(nu2);
    double sup = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double s = -4.0 + 0.08 * i;
      const double g1 = big_gamma(kUniform, m1, s), g2 = big_gamma(kUniform, m2, s);
      sup = std::max(sup, std::fabs(g1 - g2));
      if (i > 0) {
        const double sp = s - 0.08;
        CHECK(std::fabs(big_gamma(kUniform, m1, s) - big_gamma(kUniform, m1, sp)) <= 0.08 + 1e-12);
      }
    }
    // || Gamma_1 - Gamma_2 ||_inf <= (1/eps_f) W2(nu1, nu2), eps_f = 1 for uniform mu
    CHECK(sup <= wasserstein2(m1, m2) + 1e-9);
  }
}

TEST_CASE("smooth psi potential route") {
  // nu = mu = uniform on [0,1]: gamma(s) = s, Gamma(s) = s^2/2
  Measure1D nu = DensityMeasure::uniform();
  TransportPotential p = psi_potential(kUniform, nu, Measure1D(FiniteMeasure({0.0}, {1.0})));
  CHECK(p.is_smooth());
  CHECK(p(0.5) == Catch::Approx(0.125).margin(1e-9));
  CHECK(p.derivative(0.5) == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("transport potential JSON round trip") {
  std::mt19937 gen(61);
  TransportPotential p = random_pl_potential(gen);
  TransportPotential q = TransportPotential::from_json(p.to_json());
  for (int i = 0; i <= 50; ++i) {
    const double s = -5.0 + 0.2 * i;
    CHECK(q(s) == Catch::Approx(p(s)).epsilon(1e-14).margin(1e-14));
  }
}
