#include <gtest/gtest.h>

#include <sstream>

#include "szego/experiments.hpp"

using namespace szego;

namespace {

const cplx I{0.0, 1.0};

Params params(double nu, double alpha, double beta, std::size_t N = 256) {
  Params p;
  p.nu = nu;
  p.alpha = alpha;
  p.beta = beta;
  p.N = N;
  return p;
}

// Plain bisection for x (x^2 - a^2)(x^2 - b^2) = target on [lo, hi].
double bisect_root(double a, double b, double target, double lo, double hi) {
  auto f = [&](double x) { return x * (x * x - a * a) * (x * x - b * b) - target; };
  double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// (u | Pi(|u|^2)) by quadrature on a fine grid.
cplx cubic_by_quadrature(const ModeVector& u) {
  const std::size_t K = u.size(), L = 8 * K;
  std::vector<double> w(L);
  for (std::size_t j = 0; j < L; ++j) {
    const double x = 2 * M_PI * static_cast<double>(j) / static_cast<double>(L);
    cplx v{};
    for (std::size_t k = 0; k < K; ++k) v += u[k] * std::exp(I * (static_cast<double>(k) * x));
    w[j] = std::norm(v);
  }
  cplx out{};
  for (std::size_t m = 0; m < K; ++m) {
    cplx wm{};
    for (std::size_t j = 0; j < L; ++j)
      wm += w[j] * std::exp(-I * (2 * M_PI * static_cast<double>(m * j) / static_cast<double>(L)));
    wm /= static_cast<double>(L);
    out += u[m] * std::conj(wm);
  }
  return out;
}

}  // namespace

TEST(Rho, MatchesReferenceValues) {
  const auto r = stationary_rho_solver(1.0, 0.5, 0.01);
  // Exact roots of P = +-eps. Commonly quoted figures (1.00665, 0.52634,
  // 0.04006) leave |P - eps| near 3e-4 and are off in the fourth digit.
  EXPECT_NEAR(r.rho1, 1.0064896, 1e-7);
  EXPECT_NEAR(r.rho2, 0.5256308, 1e-7);
  EXPECT_NEAR(r.rho3, 0.0403275, 1e-7);
  EXPECT_NEAR(r.sum_sq(), 1.291, 1e-3);
  EXPECT_LT(r.max_residual, 1e-14);
}

TEST(Rho, AgreesWithBisection) {
  for (const auto& [s1, s2, eps] : {std::tuple{1.0, 0.5, 0.01}, std::tuple{2.0, 0.3, 0.01},
                                   std::tuple{1.5, 1.0, 0.002}}) {
    const auto r = stationary_rho_solver(s1, s2, eps);
    EXPECT_NEAR(r.rho1, bisect_root(s1, s2, eps, s1, 2 * s1), 1e-13);
    EXPECT_NEAR(r.rho2, bisect_root(s1, s2, -eps, s2, s1), 1e-13);
    EXPECT_NEAR(r.rho3, bisect_root(s1, s2, eps, 0.0, s2), 1e-13);
  }
}

TEST(Rho, BalanceIdentities) {
  const auto r = stationary_rho_solver(1.0, 0.5, 0.01);
  const auto [a, b] = balance_residuals(r);
  EXPECT_LT(a, 1e-10);
  EXPECT_LT(b, 1e-10);
  for (int j = 0; j < 3; ++j) EXPECT_GT(projection_norm_sq(r, j), 0.0);
  EXPECT_LT(r.sum_sq(), 2.0);
}

TEST(Rho, Failures) {
  EXPECT_THROW(stationary_rho_solver(0.5, 1.0, 0.01), Error);
  EXPECT_THROW(stationary_rho_solver(1.0, 0.5, 0.0), Error);
  // Beyond the local maximum of P on (sigma2, sigma1) the middle root is gone.
  try {
    stationary_rho_solver(1.0, 0.5, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::NewtonDiverged || e.kind() == ErrorKind::OrderingViolated ||
                e.kind() == ErrorKind::InequalityViolated);
  }
}

TEST(Stationary, CubicFormMatchesQuadrature) {
  ModeVector u(6);
  u[1] = {0.3, -0.2};
  u[2] = {0.7, 0.1};
  u[3] = {-0.4, 0.5};
  u[5] = {0.2, 0.2};
  EXPECT_LT(std::abs(cubic_form(u) - cubic_by_quadrature(u)), 1e-12);
}

TEST(Stationary, SearchFindsAdmissiblePoint) {
  StationaryConstraints c;
  c.N = 64;
  const auto s = stationary_search(4, 7, c);
  EXPECT_EQ(s.residual_mean, 0.0);
  EXPECT_LT(s.residual_cubic, 1e-10);
  EXPECT_LT(std::abs(cubic_by_quadrature(s.u.resized(5))), 1e-10);
  EXPECT_EQ(s.omega.verdict, OmegaVerdict::InOmega);
  EXPECT_GT(s.margin, c.min_margin);
  EXPECT_NEAR(mass(s.u), 1.0, 1e-12);
  EXPECT_LT(s.rhs_norm, 1e-10);
  EXPECT_GE(s.shifted_rank, 2u);
  EXPECT_GT(s.accepted_seeds, 0);

  const auto again = stationary_search(4, 7, c);
  EXPECT_EQ(sup_distance(again.u, s.u), 0.0);
}

TEST(Stationary, StaysPutUnderBetaOne) {
  StationaryConstraints c;
  c.N = 64;
  const auto s = stationary_search(4, 7, c);
  const auto tr = evolve(s.u, params(1, 0, 1, 64), 10.0, 1.0);
  ASSERT_FALSE(tr.breached());
  EXPECT_LT(l2_distance(tr.states.back(), s.u), 1e-7);
}

TEST(Stationary, SearchFailure) {
  StationaryConstraints c;
  c.N = 64;
  c.max_seeds = 3;
  c.min_margin = 10.0;
  try {
    stationary_search(4, 1, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SearchFailed);
  }
  EXPECT_THROW(stationary_search(3, 1, c), Error);
}

TEST(Kappa, TGammaApproachesKappa) {
  const auto r = kappa_check(1, 0, 0, 1, 0.09, 1e4);
  EXPECT_NEAR(r.kappa, 1.0, 1e-15);
  EXPECT_NEAR(r.final_ratio(), 1.0, 5e-3);
  const auto r2 = kappa_check(0.5, 0.3, 0.5, 2.0, 0.09, 1e4);
  EXPECT_NEAR(r2.final_ratio(), 1.0, 1e-2);
}

TEST(Kappa, SobolevExponents) {
  const auto r = kappa_check(1, 0, 0, 1, 0.09, 1e4);
  const auto f1 = blowup_fit(r.run, 1.0, 1e3, 1e4);
  const auto f2 = blowup_fit(r.run, 2.0, 1e3, 1e4);
  EXPECT_NEAR(f1.rate, 1.0, 0.01);
  EXPECT_NEAR(f2.rate, 3.0, 0.03);
  EXPECT_GT(f1.r_squared, 0.999);
}

TEST(Classify, Periodic) {
  const auto c = classify(RankOneState{0.0, 1.3, 0.0}, params(1, 0, 0), 10.0);
  EXPECT_EQ(c.verdict, Verdict::Periodic);
}

TEST(Classify, GenericBlowsUp) {
  const auto c = classify(RankOneState{0.0, 1.0, 0.5}, params(1, 0, 0), 1e4);
  EXPECT_EQ(c.verdict, Verdict::BlowUp) << c.note;
  ASSERT_TRUE(c.fit.has_value());
  EXPECT_NEAR(c.fit->rate, 1.0, 0.05);
}

TEST(Classify, SigmaPointScatters) {
  const auto sp = construct_sigma_point({1.0, 0.0, 0.0}, 1, 0, 0, 1, 8.0);
  const auto c = classify(sp.state, params(1, 0, 0), 8.0);
  EXPECT_EQ(c.verdict, Verdict::Scatter) << c.note;
  ASSERT_TRUE(c.fit.has_value());
  EXPECT_NEAR(c.fit->rate, 0.5 * constants(1, 0, 0, 1).scatter_rate(), 0.02 * c.fit->rate);
}

TEST(Classify, FastScatteringResolved) {
  // nu = 2: the distance falls to 1e-8 by T = 8, below what gamma = M - delta resolves.
  SigmaOptions o;
  o.verify = false;
  const auto sp = construct_sigma_point({1.0, 0.0, 0.0}, 2, 0, 0, 1, 8.0, o);
  const auto c = classify(sp.state, params(2, 0, 0), 8.0);
  EXPECT_EQ(c.verdict, Verdict::Scatter) << c.note;
  ASSERT_TRUE(c.fit.has_value());
  EXPECT_NEAR(c.fit->rate, 0.5 * constants(2, 0, 0, 1).scatter_rate(), 0.02 * c.fit->rate);
}

TEST(Classify, ModeVectorInput) {
  const RankOneState s{0.2, 0.9, cplx(0.3, 0.1)};
  const auto back = as_rank_one(embed(s, 128));
  ASSERT_TRUE(back.has_value());
  EXPECT_LT(std::abs(back->p - s.p), 1e-14);
  EXPECT_EQ(classify(embed({0.0, 1.0, 0.0}, 128), params(1, 0, 0, 128), 5.0).verdict,
            Verdict::Periodic);

  ModeVector u(64);
  u[1] = 1.0;
  u[3] = 0.5;
  EXPECT_FALSE(as_rank_one(u).has_value());
  const auto c = classify(u, params(1, 0, 0, 64), 1.0);
  EXPECT_EQ(c.verdict, Verdict::Undetermined);
  EXPECT_FALSE(c.note.empty());
}

TEST(Sweep, DeterministicAcrossJobs) {
  SweepGrid g;
  g.nu = {1.0, 2.0};
  g.beta = {0.0, 0.5};
  g.families = {Family::Generic, Family::Periodic};
  g.generic_horizon = 2e3;
  const auto a = sweep(g, 1), b = sweep(g, 4);
  ASSERT_EQ(a.size(), 8u);
  std::ostringstream sa, sb;
  write_sweep_csv(a, sa);
  write_sweep_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')),
            "nu,alpha,beta,M,family,verdict,rate,kappa,a_sq,sigma,r_squared,error");
  EXPECT_EQ(a[1].family, Family::Periodic);
  EXPECT_EQ(a[1].verdict, Verdict::Periodic);
}

TEST(Sweep, ErrorsStayInTheirRow) {
  SweepGrid g;
  g.alpha = {-2.0};  // alpha + 2M = 0
  g.families = {Family::Generic};
  const auto rows = sweep(g);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_EQ(rows[0].verdict, Verdict::Undetermined);
}
