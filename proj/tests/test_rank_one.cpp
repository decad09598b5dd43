#include <gtest/gtest.h>

#include <random>

#include "szego/integrator.hpp"
#include "szego/rank_one.hpp"

using namespace szego;

namespace {

const cplx I{0.0, 1.0};

RankOneState random_state(std::mt19937_64& rng, double pmax = 0.8) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), ang(0.0, 6.283185307179586),
      rad(0.05, pmax);
  RankOneState s;
  s.b = {u(rng), u(rng)};
  s.c = {u(rng) + 1.5, u(rng)};
  s.p = rad(rng) * std::exp(I * ang(rng));
  return s;
}

Params params(double nu, double alpha, double beta) {
  Params p;
  p.nu = nu;
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

// Tangent of the embedding at s applied to the velocity ds.
ModeVector embed_tangent(const RankOneState& s, const RankOneState& ds, std::size_t N) {
  ModeVector v(N);
  v[0] = ds.b;
  for (std::size_t k = 1; k < N; ++k) {
    const double n = static_cast<double>(k - 1);
    const cplx pk = std::pow(s.p, n);
    v[k] = ds.c * pk + (k >= 2 ? s.c * n * std::pow(s.p, n - 1.0) * ds.p : cplx{});
  }
  return v;
}

}  // namespace

TEST(Embed, Examples) {
  EXPECT_EQ(embed({0.0, 1.0, 0.0}, 4), (ModeVector{0.0, 1.0, 0.0, 0.0}));
  EXPECT_EQ(embed({0.0, 1.0, 0.5}, 4), (ModeVector{0.0, 1.0, 0.5, 0.25}));
  const auto u = embed({cplx(1, 1), 2.0, cplx(0, 0.3)}, 3);
  EXPECT_LT(sup_distance(u, ModeVector{cplx(1, 1), 2.0, cplx(0, 0.6)}), 1e-15);
  EXPECT_THROW(embed({0.0, 1.0, 1.0}, 4), Error);
}

TEST(RankOne, MassAndMomentumMatchEmbedding) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    const auto s = random_state(rng);
    const auto u = embed(s, 512);
    EXPECT_NEAR(s.mass(), mass(u), 1e-12 * s.mass());
    EXPECT_NEAR(s.momentum(), momentum(u), 1e-11 * s.momentum());
  }
}

TEST(BcpRhs, CircleIsPeriodic) {
  const RankOneState s{0.0, cplx(0.6, 0.9), 0.0};
  const auto d = bcp_rhs(s, params(1.3, 0.4, 0.25));
  EXPECT_EQ(d.b, cplx{});
  EXPECT_EQ(d.p, cplx{});
  EXPECT_LT(std::abs(d.c - (-I * 0.75 * std::norm(s.c) * s.c)), 1e-15);
}

TEST(BcpRhs, MomentumIsFirstIntegral) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_state(rng);
    const auto d = bcp_rhs(s, params(0.9, -0.5, 1.4));
    // M = |c|^2 / q^2, dM = 2Re(conj(c) dc)/q^2 + 4|c|^2 Re(conj(p) dp)/q^3.
    const double q = s.q();
    const double dM = 2.0 * (std::conj(s.c) * d.c).real() / (q * q) +
                      4.0 * std::norm(s.c) * (std::conj(s.p) * d.p).real() / (q * q * q);
    EXPECT_LT(std::abs(dM), 1e-12 * s.momentum() * (1.0 + std::abs(d.c) + std::abs(d.p)));
  }
}

TEST(BcpRhs, TangentToFullEquation) {
  std::mt19937_64 rng(3);
  const std::size_t N = 512;
  for (int i = 0; i < 10; ++i) {
    const auto s = random_state(rng, 0.7);
    const auto p = params(1.1, 0.3, 0.6);
    const auto full = rhs_full(embed(s, N), p);
    const auto tan = embed_tangent(s, bcp_rhs(s, p), N);
    EXPECT_LT(sup_distance(full, tan), 1e-10 * (1.0 + std::sqrt(mass(full))));
  }
}

TEST(EvolveBcp, CircleKeepsModulus) {
  const auto tr = evolve_bcp({0.0, 1.0, 0.0}, params(1, 0, 0), 50.0, 0.5);
  for (const auto& s : tr.states) {
    // Tolerance-limited: DOPRI5 loses about 1e-11 in modulus per unit time.
    EXPECT_NEAR(std::abs(s.c), 1.0, 1e-9);
    EXPECT_EQ(s.b, cplx{});
    EXPECT_EQ(s.p, cplx{});
  }
  const auto& last = tr.states.back();
  EXPECT_LT(std::abs(last.c - std::exp(-I * 50.0)), 1e-7);
}

TEST(EvolveBcp, MomentumDrift) {
  // At the default tolerance the drift stays below 1e-10 per unit time.
  const auto tr = evolve_bcp({0.3, 1.0, 0.0}, params(1, 0, 0), 20.0, 0.1);
  EXPECT_LT(tr.momentum_drift / 20.0, 1e-10);
  EXPECT_FALSE(tr.boundary_stop);

  Params tight = params(1, 0, 0);
  tight.rel_tol = tight.abs_tol = 1e-12;
  EXPECT_LT(evolve_bcp({0.3, 1.0, 0.0}, tight, 20.0, 0.1).momentum_drift, 1e-10);
}

TEST(Reduced, PushforwardMatchesChartRhs) {
  std::mt19937_64 rng(4);
  const auto par = params(0.8, 0.7, -0.3);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_state(rng);
    const auto d = bcp_rhs(s, par);
    const double M = s.momentum();
    // Chain rule for eta = |b|^2, delta = M|p|^2, zeta = M c conj(b) conj(p),
    // with M constant along the flow.
    const double deta = 2.0 * (std::conj(s.b) * d.b).real();
    const double ddel = 2.0 * M * (std::conj(s.p) * d.p).real();
    const cplx dz = M * (d.c * std::conj(s.b) * std::conj(s.p) + s.c * std::conj(d.b) * std::conj(s.p) +
                         s.c * std::conj(s.b) * std::conj(d.p));
    for (Chart ch : {Chart::Scatter, Chart::BlowUp}) {
      const auto r = reduced_rhs(to_reduced(s, ch), par);
      const double scale = 1.0 + std::abs(dz);
      EXPECT_NEAR(r.eta, deta, 1e-10 * scale);
      EXPECT_NEAR(r.second, ch == Chart::Scatter ? ddel : -ddel, 1e-10 * scale);
      EXPECT_LT(std::abs(r.zeta - dz), 1e-10 * scale);
    }
  }
}

TEST(Reduced, Examples) {
  ReducedState z;
  z.chart = Chart::Scatter;
  z.M = 1.3;
  const auto d = reduced_rhs(z, params(1, 0.2, 0.4));
  EXPECT_EQ(d.eta, 0.0);
  EXPECT_EQ(d.second, 0.0);
  EXPECT_EQ(d.zeta, cplx{});

  ReducedState g;
  g.chart = Chart::BlowUp;
  g.M = 2.0;
  g.second = 0.5;
  const auto dg = reduced_rhs(g, params(1, 0.2, 0.4));
  EXPECT_EQ(dg.second, 0.0);
  EXPECT_LT(std::abs(dg.zeta - I * 0.25 * 1.5), 1e-15);
}

TEST(Reduced, ChartCompatibilityAlongFlow) {
  const RankOneState s0{cplx(0.4, -0.2), cplx(1.1, 0.3), cplx(0.2, 0.35)};
  Params par = params(1, 0.5, 0.3);
  par.rel_tol = par.abs_tol = 1e-12;
  const auto ts = uniform_times(0.0, 10.0, 0.5);
  const auto full = evolve_bcp_at(s0, par, ts, ode_options(par));
  const auto red = evolve_reduced_at(to_reduced(s0, Chart::Scatter), par, ts, ode_options(par));
  ASSERT_EQ(full.states.size(), red.states.size());
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const auto a = to_reduced(full.states[j], Chart::Scatter);
    const auto& b = red.states[j];
    EXPECT_NEAR(a.eta, b.eta, 1e-8);
    EXPECT_NEAR(a.second, b.second, 1e-8);
    EXPECT_LT(std::abs(a.zeta - b.zeta), 1e-8);
    // |zeta|^2 = (M - delta)^2 eta delta
    const double inv = (b.M - b.second) * (b.M - b.second) * b.eta * b.second;
    EXPECT_NEAR(std::norm(b.zeta), inv, 1e-8);
  }
}

TEST(Constants, ReferenceValues) {
  const auto k = constants(1, 0, 0, 1, {1.0, 2.0});
  EXPECT_NEAR(k.sigma * k.sigma, (1.0 + std::sqrt(17.0)) / 2.0, 1e-14);
  EXPECT_NEAR(k.sigma, 1.6004852, 1e-7);
  EXPECT_NEAR(k.rho, 1.2496210, 1e-7);
  EXPECT_NEAR(k.kappa, 1.0, 1e-15);
  EXPECT_NEAR(k.Z, 0.230913, 1e-6);
  EXPECT_NEAR(k.lambda_plus.real(), 0.3002426, 1e-7);
  EXPECT_NEAR(k.a_sq[0], 2.0, 1e-13);
  // a^2(s) = Gamma(2s+1) M^{2s} kappa^{1-2s}
  EXPECT_NEAR(k.a_sq[1], std::tgamma(5.0) * std::pow(k.kappa, -3.0), 1e-12);
  EXPECT_EQ(k.varsigma, 1);
}

TEST(Constants, IdentitiesOnRandomGrid) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> nu(1e-3, 5.0), al(-3, 3), be(-2, 3), M(1e-3, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const double n = nu(rng), a = al(rng), b = be(rng), m = M(rng);
    if (std::abs(a + 2 * m) < 1e-6) continue;
    const auto k = constants(n, a, b, m, {1.5});
    const double D = n * n - a * a - 4 * a * m;
    const double sc = 1.0 + std::abs(D) + k.sigma * k.sigma;
    EXPECT_NEAR(k.sigma * k.sigma - k.rho * k.rho, D, 1e-12 * sc);
    EXPECT_NEAR(k.varsigma * k.sigma * k.rho, n * (a + 2 * m), 1e-12 * sc);
    const double lsc = 1.0 + std::norm(k.lambda_plus) + std::norm(k.lambda_minus) + m * m * (1 + b * b);
    EXPECT_LT(std::abs(characteristic(k, k.lambda_plus)), 1e-12 * lsc);
    EXPECT_LT(std::abs(characteristic(k, k.lambda_minus)), 1e-12 * lsc);
    EXPECT_NEAR(k.Z, (k.sigma - n) / (k.sigma + n), 1e-12);
    // Mirror of a^2 via kappa.
    const double alt = std::tgamma(4.0) * std::pow(m, 3.0) * std::pow(k.kappa, -2.0);
    EXPECT_NEAR(k.a_sq[0], alt, 1e-11 * alt);
  }
}

TEST(Constants, Degenerate) {
  try {
    constants(1, -2, 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateParameters);
  }
  EXPECT_THROW(constants(0, 0, 0, 1), Error);
}

TEST(MatrixA, EigenvaluesMatchClosedForm) {
  const auto k = constants(1, 0, 0, 1);
  const auto ev = matrix_A_eigenvalues(1, 0, 1);
  const std::array<cplx, 4> want{1.0 + k.sigma, 1.0 - k.sigma, cplx(1.0, k.rho), cplx(1.0, -k.rho)};
  for (const auto& w : want) {
    double best = 1e9;
    for (int i = 0; i < 4; ++i) best = std::min(best, std::abs(ev[i] - w));
    EXPECT_LT(best, 1e-10);
  }
  EXPECT_NEAR(matrix_A(1.7, 0.3, 2.0).trace(), 4 * 1.7, 1e-15);
  EXPECT_EQ(Q_term(Vec4::Zero(), 1.0, 0.0), Vec4::Zero());
}

TEST(MatrixA, SigmaDirectionIsEigenvector) {
  for (auto [n, a, m] : {std::tuple{1.0, 0.0, 1.0}, {0.5, -1.0, 2.0}, {2.0, 1.0, 0.3}}) {
    const auto k = constants(n, a, 0.0, m);
    const Vec4 v = sigma_direction(k);
    EXPECT_LT((matrix_A(n, a, m) * v - (n + k.sigma) * v).norm(), 1e-12 * v.norm() * (1 + m * m));
  }
}

TEST(MatrixA, QMatchesScatterChart) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  const double nu = 0.9, al = 0.4, be = 0.7, M = 1.2;
  for (int i = 0; i < 10; ++i) {
    ReducedState r;
    r.chart = Chart::Scatter;
    r.M = M;
    r.eta = u(rng);
    r.second = u(rng);
    r.zeta = {u(rng), u(rng)};
    const auto d = reduced_rhs(r, params(nu, al, be));
    const Vec4 X = to_vec(r);
    const Vec4 lhs = to_vec(d);
    const Vec4 rhs = -matrix_A(nu, al, M) * X + Q_term(X, M, be);
    EXPECT_LT((lhs - rhs).norm(), 1e-14);
  }
}

TEST(DistToCM, Examples) {
  EXPECT_NEAR(dist_to_CM({0.0, std::sqrt(2.0), 0.0}), 0.0, 1e-15);
  EXPECT_NEAR(dist_to_CM({cplx(0.3, 0.4), std::sqrt(2.0), 0.0}), 0.5, 1e-15);
  EXPECT_NEAR(dist_to_CM({0.0, 1.0, 0.5}), 2.0 / 3.0, 1e-15);
  // Closed form sqrt(mass - 2 sqrt(M)|c| + M) away from the circle.
  const RankOneState s{cplx(0.2, -0.1), cplx(0.7, 0.4), cplx(-0.3, 0.2)};
  const double M = s.momentum();
  EXPECT_NEAR(dist_to_CM(s), std::sqrt(s.mass() - 2 * std::sqrt(M) * std::abs(s.c) + M), 1e-13);
}

TEST(TailSolve, ZeroCharge) {
  const auto sol = scatter_tail_solve(0.0, 1, 0, 0, 1, 6.0);
  EXPECT_EQ(sol.X_T, Vec4::Zero());
}

TEST(TailSolve, SmallCorrectionAndOdeResidual) {
  const double nu = 1, al = 0, be = 0, M = 1, T = 6;
  const auto k = constants(nu, al, be, M);
  const auto sol = scatter_tail_solve(1.0, nu, al, be, M, T);
  const double rel = (sol.X_T - sol.linear_T).norm() / sol.linear_T.norm();
  EXPECT_LT(rel, 1e-4);
  EXPECT_GT(rel, 0.0);
  EXPECT_LT(sol.contraction, 0.5);
  // Centred differences of the grid solution against the chart vector field.
  const double h = sol.times[1] - sol.times[0];
  for (std::size_t j = 1; j < 40; ++j) {
    const Vec4 dX = (sol.X[j + 1] - sol.X[j - 1]) / (2 * h);
    const Vec4 f = to_vec(reduced_rhs(from_vec(sol.X[j], Chart::Scatter, M), params(nu, al, be)));
    const double scale = std::exp(-(nu + k.sigma) * sol.times[j]);
    EXPECT_LT((dX - f).norm() / scale, 2e-3);  // O(h^2) differencing error dominates
  }
}

TEST(TailSolve, ForwardRateOfEta) {
  const double nu = 1, M = 1, T = 6;
  const auto k = constants(nu, 0, 0, M);
  const auto sol = scatter_tail_solve(1.0, nu, 0, 0, M, T);
  Params par = params(nu, 0, 0);
  OdeOptions oo;
  oo.rel_tol = 1e-12;
  oo.abs_tol = 1e-22;
  const auto ts = uniform_times(T, T + 4, 0.1);
  const auto red = evolve_reduced_at(sol.at_T, par, ts, oo);
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const double lin = std::exp(-(nu + k.sigma) * ts[j]);
    EXPECT_NEAR(red.states[j].eta / lin, 1.0, 1e-5);
    EXPECT_NEAR(red.states[j].second / red.states[j].eta, k.Z, 1e-5);
  }
}

TEST(Sigma, SeedAgreesWithTailSolve) {
  const double nu = 1, al = 0.3, be = 0.4, M = 1.5, T = 7;
  const auto k = constants(nu, al, be, M);
  const auto seed = sigma_seed({1.0, 0.7, -0.4}, k, T);
  const auto r = to_reduced(seed, Chart::Scatter);
  const auto sol = scatter_tail_solve(1.0, nu, al, be, M, T);
  const double lin = std::exp(-(nu + k.sigma) * T);
  EXPECT_NEAR(r.eta / lin, sol.at_T.eta / lin, 1e-5);
  EXPECT_NEAR(r.second / lin, sol.at_T.second / lin, 1e-5);
  EXPECT_LT(std::abs(r.zeta - sol.at_T.zeta) / lin, 1e-5);
  EXPECT_NEAR(seed.momentum(), M, 1e-14 * M);
}

TEST(Sigma, ConstructionRates) {
  const auto sp = construct_sigma_point({1.0, 0.0, 0.0}, 1, 0, 0, 1, 8.0);
  const double lam = 1.0 + sp.k.sigma;
  EXPECT_GT(sp.state.mass(), 1.0);
  EXPECT_GT(std::abs(sp.state.b), 0.0);
  EXPECT_NEAR(sp.dist_fit.rate, lam / 2, 0.02 * lam / 2);
  EXPECT_NEAR(sp.eta_fit.rate, lam, 0.02 * lam);
  EXPECT_GT(sp.dist_fit.r_squared, 0.999);
  EXPECT_GE(sp.min_mass_margin, -1e-8);
  const auto& last = sp.forward.back();
  const auto r = to_reduced(last, Chart::Scatter);
  EXPECT_NEAR(r.second / r.eta, sp.k.Z, 0.01 * sp.k.Z);
}

TEST(Sigma, PhaseEquivariance) {
  // x -> x + a rotates c and p by e^{ia} and leaves b alone.
  const double d = 0.9;
  SigmaOptions o;
  o.verify = false;
  const auto a = construct_sigma_point({1.0, 0.0, 0.2}, 1, 0.5, 0.3, 1, 8.0, o);
  const auto b = construct_sigma_point({1.0, d, 0.2}, 1, 0.5, 0.3, 1, 8.0, o);
  const cplx r = std::exp(I * d);
  EXPECT_LT(std::abs(b.state.b - a.state.b), 1e-8);
  EXPECT_LT(std::abs(b.state.c - r * a.state.c), 1e-8);
  EXPECT_LT(std::abs(b.state.p - r * a.state.p), 1e-8);
}

TEST(Sigma, TimeShiftIdentity) {
  // The charge (eta e^{-lam T'}, theta - M(1-beta)T', phi - omega_b T')
  // labels the orbit point reached after time T'.
  const double nu = 1, al = 0.5, be = 0.3, M = 1, Tp = 1.5;
  const auto k = constants(nu, al, be, M);
  const double lam = nu + k.sigma;
  const double omega_b = (2 * M + al) * lam / (2 * k.sigma);
  SigmaOptions o;
  o.verify = false;
  const AsymptoticCharge c0{1.0, 0.3, -0.2};
  const auto base = construct_sigma_point(c0, nu, al, be, M, 8.0, o);
  const AsymptoticCharge c1{c0.eta_inf * std::exp(-lam * Tp), c0.theta - M * (1 - be) * Tp,
                            c0.phi - omega_b * Tp};
  const auto shifted = construct_sigma_point(c1, nu, al, be, M, 8.0, o);
  Params par = params(nu, al, be);
  OdeOptions oo;
  oo.rel_tol = 1e-12;
  oo.abs_tol = 1e-16;
  const double ts[2] = {0.0, Tp};
  const auto fw = evolve_bcp_at(base.state, par, std::span<const double>(ts, 2), oo);
  const auto& s = fw.states.back();
  EXPECT_LT(std::abs(s.b - shifted.state.b), 1e-6);
  EXPECT_LT(std::abs(s.c - shifted.state.c), 1e-6);
  EXPECT_LT(std::abs(s.p - shifted.state.p), 1e-6);
}

TEST(Sigma, CrossCheckWithFullEquation) {
  const auto sp = construct_sigma_point({1.0, 0.0, 0.0}, 1, 0, 0, 1, 8.0);
  Params par = params(1, 0, 0);
  par.N = 64;
  par.rel_tol = par.abs_tol = 1e-12;
  const auto tr = evolve(embed(sp.state, 64), par, 4.0, 0.5);
  ASSERT_FALSE(tr.breached());
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const auto& s = sp.forward[static_cast<std::size_t>(std::lround(tr.times[j] / 0.05))];
    EXPECT_LT(sup_distance(tr.states[j], embed(s, 64)), 1e-8);
  }
}

TEST(SobolevFromGamma, MatchesSeriesNearBoundary) {
  const double pr = 0.999;
  const RankOneState s{0.0, 1.0, pr};
  const double M = s.momentum();
  const double gam = M * s.q();
  double exact = 0.0;
  for (std::size_t k = 1; k < 200000; ++k)
    exact += (1.0 + double(k) * double(k)) * std::pow(pr, 2.0 * double(k - 1));
  EXPECT_NEAR(sobolev_from_gamma(M, gam, 1.0) / exact, 1.0, 2e-3);
}

TEST(RankOne, H1ClosedForm) {
  const RankOneState s{cplx(0.2, -0.1), cplx(0.7, 0.4), cplx(0.5, 0.3)};
  EXPECT_NEAR(h1_sq(s), sobolev_sq(embed(s, 512), 1.0), 1e-12 * h1_sq(s));
}
