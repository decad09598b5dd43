#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "szego/dopri.hpp"
#include "szego/error.hpp"
#include "szego/fit.hpp"
#include "szego/mode_vector.hpp"

namespace szego {

/// u = b + c e^{ix} / (1 - p e^{ix}).
struct RankOneState {
  cplx b{};
  cplx c{};
  cplx p{};

  double q() const { return 1.0 - std::norm(p); }
  double momentum() const { return std::norm(c) / (q() * q()); }
  double mass() const { return std::norm(b) + std::norm(c) / q(); }

  void validate() const {
    if (!(std::abs(p) < 1.0)) throw Error(ErrorKind::Validation, "|p| must be < 1");
    if (!std::isfinite(std::abs(b)) || !std::isfinite(std::abs(c)))
      throw Error(ErrorKind::Validation, "b and c must be finite");
  }
};

namespace detail {

inline nlohmann::json pair_json(cplx z) { return {z.real(), z.imag()}; }

inline cplx pair_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::Validation, std::string("missing key ") + key);
  const auto& e = j.at(key);
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
    throw Error(ErrorKind::Validation, std::string(key) + " must be [re, im]");
  return {e[0].get<double>(), e[1].get<double>()};
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const RankOneState& s) {
  j = {{"b", detail::pair_json(s.b)}, {"c", detail::pair_json(s.c)}, {"p", detail::pair_json(s.p)}};
}

inline void from_json(const nlohmann::json& j, RankOneState& s) {
  if (!j.is_object()) throw Error(ErrorKind::Validation, "rank-one state must be an object");
  for (const auto& [k, v] : j.items())
    if (k != "b" && k != "c" && k != "p")
      throw Error(ErrorKind::Validation, "unknown rank-one key: " + k);
  s.b = detail::pair_from(j, "b");
  s.c = detail::pair_from(j, "c");
  s.p = detail::pair_from(j, "p");
}

/// ||u||_{H^1}^2 with weight 1 + k^2, summed in closed form over all modes.
inline double h1_sq(const RankOneState& s) {
  const double x = std::norm(s.p), q = 1.0 - x;
  return std::norm(s.b) + std::norm(s.c) * (1.0 / q + (1.0 + x) / (q * q * q));
}

/// Coefficients b, c, c p, c p^2, ... truncated to N modes.
inline ModeVector embed(const RankOneState& s, std::size_t N) {
  s.validate();
  ModeVector u(N);
  if (N == 0) return u;
  u[0] = s.b;
  cplx term = s.c;
  for (std::size_t k = 1; k < N; ++k) {
    u[k] = term;
    term *= s.p;
  }
  return u;
}

/// Time derivative (b', c', p') on the rank-one manifold. M is read from
/// the state on every call.
inline RankOneState bcp_rhs(const RankOneState& s, const Params& par) {
  const cplx I{0.0, 1.0};
  const double q = s.q();
  const double M = std::norm(s.c) / (q * q);
  const double bb = std::norm(s.b);
  RankOneState d;
  d.b = -I * ((bb + 2.0 * M * q) * s.b + M * s.c * std::conj(s.p)) - (par.nu + I * par.alpha) * s.b;
  d.c = -I * (2.0 * bb * s.c + 2.0 * M * q * s.b * s.p + (1.0 - par.beta) * M * s.c);
  d.p = -I * (s.c * std::conj(s.b) + (1.0 - par.beta) * M * s.p * q);
  return d;
}

/// L^2 distance to the circle of states sqrt(M) e^{i theta} e^{ix}, where M
/// is the momentum. Expanded so that no cancellation occurs near the circle.
inline double dist_to_CM(const RankOneState& s) {
  const double q = s.q();
  const double M = std::norm(s.c) / (q * q);
  const double dc = std::abs(s.c) - std::sqrt(M);
  return std::sqrt(std::norm(s.b) + dc * dc + std::norm(s.c) * std::norm(s.p) / q);
}

using BcpVec = Eigen::Vector3cd;

inline BcpVec to_vec(const RankOneState& s) { return BcpVec(s.b, s.c, s.p); }
inline RankOneState from_vec(const BcpVec& v) { return {v[0], v[1], v[2]}; }

struct RankOneTrajectory {
  Params params;
  std::vector<double> times;
  std::vector<RankOneState> states;
  bool boundary_stop = false;  // 1 - |p|^2 fell below the floor
  double momentum_drift = 0.0;
  OdeStats stats;
};

inline constexpr double kBoundaryFloor = 1e-12;

inline OdeOptions ode_options(const Params& p) {
  OdeOptions o;
  o.rel_tol = p.rel_tol;
  o.abs_tol = p.abs_tol;
  return o;
}

inline RankOneTrajectory evolve_bcp_at(const RankOneState& s0, const Params& par,
                                       std::span<const double> times, const OdeOptions& opt) {
  par.validate();
  s0.validate();
  if (s0.c == cplx{}) throw Error(ErrorKind::Validation, "c must be nonzero on the manifold");
  RankOneTrajectory tr;
  tr.params = par;
  const double M0 = s0.momentum();
  auto f = [&par](double, const BcpVec& v) { return to_vec(bcp_rhs(from_vec(v), par)); };
  auto note = [&](double t, const BcpVec& v) {
    const auto s = from_vec(v);
    tr.times.push_back(t);
    tr.states.push_back(s);
    tr.momentum_drift = std::max(tr.momentum_drift, std::abs(s.momentum() - M0) / M0);
  };
  auto observe = [&](double t, const BcpVec& v) {
    note(t, v);
    return true;
  };
  auto guard = [&](double t, const BcpVec& v) {
    if (1.0 - std::norm(v[2]) < kBoundaryFloor) {
      tr.boundary_stop = true;
      note(t, v);
      return false;
    }
    return true;
  };
  tr.stats = integrate(f, to_vec(s0), times, opt, observe, guard);
  return tr;
}

inline RankOneTrajectory evolve_bcp(const RankOneState& s0, const Params& par, double t_end,
                                    double sample_dt) {
  if (!(t_end > 0.0)) throw Error(ErrorKind::Validation, "t_end must be > 0");
  const auto ts = uniform_times(0.0, t_end, sample_dt);
  return evolve_bcp_at(s0, par, ts, ode_options(par));
}

// Reduced systems.

enum class Chart { BlowUp, Scatter };

inline const char* to_string(Chart c) { return c == Chart::BlowUp ? "BlowUp" : "Scatter"; }

/// (eta, gamma, zeta) in the blow-up chart or (eta, delta, zeta) in the
/// scattering chart, with eta = |b|^2, gamma = M(1-|p|^2), delta = M|p|^2 and
/// zeta = M c conj(b) conj(p).
struct ReducedState {
  double eta = 0.0;
  double second = 0.0;
  cplx zeta{};
  Chart chart = Chart::BlowUp;
  double M = 1.0;

  double gamma() const { return chart == Chart::BlowUp ? second : M - second; }
  double delta() const { return chart == Chart::Scatter ? second : M - second; }
};

inline void to_json(nlohmann::json& j, const ReducedState& r) {
  j = {{"eta", r.eta},
       {r.chart == Chart::BlowUp ? "gamma" : "delta", r.second},
       {"zeta", detail::pair_json(r.zeta)},
       {"chart", to_string(r.chart)},
       {"M", r.M}};
}

inline ReducedState to_reduced(const RankOneState& s, Chart chart) {
  ReducedState r;
  r.chart = chart;
  r.M = s.momentum();
  r.eta = std::norm(s.b);
  r.second = chart == Chart::BlowUp ? r.M * s.q() : r.M * std::norm(s.p);
  r.zeta = r.M * s.c * std::conj(s.b) * std::conj(s.p);
  return r;
}

inline ReducedState change_chart(const ReducedState& r, Chart chart) {
  if (r.chart == chart) return r;
  ReducedState o = r;
  o.chart = chart;
  o.second = r.M - r.second;
  return o;
}

/// Time derivative of the reduced state; the result carries the same chart
/// and M, with `second` holding gamma' or delta'.
inline ReducedState reduced_rhs(const ReducedState& r, const Params& par) {
  const cplx I{0.0, 1.0};
  const double M = r.M, eta = r.eta, nu = par.nu, al = par.alpha, be = par.beta;
  const cplx z = r.zeta;
  ReducedState d = r;
  d.eta = -2.0 * nu * eta + 2.0 * z.imag();
  if (r.chart == Chart::BlowUp) {
    const double g = r.second;
    d.second = -2.0 * z.imag();
    d.zeta = -(nu + I * (1.0 - be) * M - I * al) * z + I * z * ((3.0 - be) * g - eta) -
             2.0 * I * eta * g * M + I * g * g * (M - g + 3.0 * eta);
  } else {
    const double dl = r.second;
    d.second = 2.0 * z.imag();
    d.zeta = -(nu - I * (2.0 * M + al)) * z - I * ((3.0 - be) * dl + eta) * z -
             2.0 * I * eta * dl * (M - dl) + I * (M - dl) * (M - dl) * (dl + eta);
  }
  return d;
}

using RedVec = Eigen::Vector4d;

inline RedVec to_vec(const ReducedState& r) {
  return RedVec(r.eta, r.second, r.zeta.real(), r.zeta.imag());
}

inline ReducedState from_vec(const RedVec& v, Chart chart, double M) {
  ReducedState r;
  r.eta = v[0];
  r.second = v[1];
  r.zeta = {v[2], v[3]};
  r.chart = chart;
  r.M = M;
  return r;
}

struct ReducedTrajectory {
  Params params;
  std::vector<double> times;
  std::vector<ReducedState> states;
  OdeStats stats;
};

inline ReducedTrajectory evolve_reduced_at(const ReducedState& r0, const Params& par,
                                           std::span<const double> times, const OdeOptions& opt) {
  par.validate();
  if (!(r0.M > 0.0)) throw Error(ErrorKind::Validation, "M must be > 0");
  ReducedTrajectory tr;
  tr.params = par;
  const Chart ch = r0.chart;
  const double M = r0.M;
  auto f = [&](double, const RedVec& v) { return to_vec(reduced_rhs(from_vec(v, ch, M), par)); };
  tr.stats = integrate(f, to_vec(r0), times, opt, [&](double t, const RedVec& v) {
    tr.times.push_back(t);
    tr.states.push_back(from_vec(v, ch, M));
    return true;
  });
  return tr;
}

/// ||u||_{H^s}^2 ~ Gamma(2s+1) M^{2s} gamma^{1-2s} as gamma -> 0.
inline double sobolev_from_gamma(double M, double gamma, double s) {
  return std::tgamma(2.0 * s + 1.0) * std::pow(M, 2.0 * s) * std::pow(gamma, 1.0 - 2.0 * s);
}

// Closed-form asymptotic constants.

struct AsymptoticConstants {
  double nu = 0.0, alpha = 0.0, beta = 0.0, M = 0.0;
  int varsigma = 1;
  double sigma = 0.0;
  double rho = 0.0;
  double kappa = 0.0;
  cplx lambda_plus{};
  cplx lambda_minus{};
  double Z = 0.0;
  std::vector<double> s_list;
  std::vector<double> a_sq;

  double scatter_rate() const { return nu + sigma; }
};

inline void to_json(nlohmann::json& j, const AsymptoticConstants& c) {
  j = {{"nu", c.nu},
       {"alpha", c.alpha},
       {"beta", c.beta},
       {"M", c.M},
       {"varsigma", c.varsigma},
       {"sigma", c.sigma},
       {"rho", c.rho},
       {"kappa", c.kappa},
       {"lambda_plus", detail::pair_json(c.lambda_plus)},
       {"lambda_minus", detail::pair_json(c.lambda_minus)},
       {"Z", c.Z},
       {"s", c.s_list},
       {"a_sq", c.a_sq}};
}

inline AsymptoticConstants constants(double nu, double alpha, double beta, double M,
                                     const std::vector<double>& s_list = {1.0}) {
  if (!(nu > 0.0)) throw Error(ErrorKind::Validation, "nu must be > 0");
  if (!(M > 0.0)) throw Error(ErrorKind::Validation, "M must be > 0");
  if (!std::isfinite(alpha) || !std::isfinite(beta))
    throw Error(ErrorKind::Validation, "alpha and beta must be finite");
  const double w = alpha + 2.0 * M;
  if (std::abs(w) <= 1e-14 * std::max({1.0, std::abs(alpha), M}))
    throw Error(ErrorKind::DegenerateParameters, "alpha + 2M = 0 leaves the sign undefined");

  AsymptoticConstants k;
  k.nu = nu;
  k.alpha = alpha;
  k.beta = beta;
  k.M = M;
  k.varsigma = w > 0.0 ? 1 : -1;
  const double D = nu * nu - alpha * alpha - 4.0 * alpha * M;
  const double E = 2.0 * nu * std::abs(w);
  const double root = std::hypot(D, E);
  // sigma^2 = (D + root)/2, rearranged when D < 0 to avoid cancellation.
  const double sigma_sq = D >= 0.0 ? 0.5 * (D + root) : 0.5 * E * E / (root - D);
  k.sigma = std::sqrt(sigma_sq);
  k.rho = nu * std::abs(w) / k.sigma;
  if (std::abs(k.sigma - nu) <= 1e-12 * nu)
    throw Error(ErrorKind::DegenerateParameters, "sigma = nu");

  const double det = (1.0 - beta) * M - alpha;
  k.kappa = (nu * nu + det * det) / (2.0 * nu * M);

  const cplx I{0.0, 1.0};
  const cplx lead = -(nu + I * (alpha + 2.0 * beta * M));
  const cplx disc = k.sigma + I * (k.varsigma * k.rho);
  k.lambda_plus = 0.5 * (lead + disc);
  k.lambda_minus = 0.5 * (lead - disc);

  const cplx K = (k.varsigma * k.rho - alpha + I * (nu - k.sigma)) / (2.0 * M) - 1.0;
  k.Z = std::norm(K);

  k.s_list = s_list;
  for (double s : s_list) {
    const double base = (nu * nu + det * det) / (2.0 * nu);
    k.a_sq.push_back(std::tgamma(2.0 * s + 1.0) * std::pow(M, 4.0 * s - 1.0) *
                     std::pow(base, 1.0 - 2.0 * s));
  }
  return k;
}

/// Residual of the characteristic equation
/// lambda^2 + (nu + i(alpha + 2 beta M)) lambda - ((1-beta)(i nu - alpha) M + beta^2 M^2).
inline cplx characteristic(const AsymptoticConstants& k, cplx lambda) {
  const cplx I{0.0, 1.0};
  const double M = k.M;
  return lambda * lambda + (k.nu + I * (k.alpha + 2.0 * k.beta * M)) * lambda -
         ((1.0 - k.beta) * (I * k.nu - k.alpha) * M + k.beta * k.beta * M * M);
}

// Linearisation at the circle in the scattering chart: X = (eta, delta,
// Re zeta, Im zeta) solves X' = -A X + Q(X).

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

inline Mat4 matrix_A(double nu, double alpha, double M) {
  const double w = 2.0 * M + alpha;
  Mat4 A;
  A << 2.0 * nu, 0.0, 0.0, -2.0,
       0.0, 0.0, 0.0, -2.0,
       0.0, 0.0, nu, w,
       -M * M, -M * M, -w, nu;
  return A;
}

inline Eigen::Vector4cd matrix_A_eigenvalues(double nu, double alpha, double M) {
  Eigen::EigenSolver<Mat4> es(matrix_A(nu, alpha, M), false);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::Eigensolver, "eigensolver failed on the 4x4 linearisation");
  return es.eigenvalues();
}

inline Vec4 Q_term(const Vec4& X, double M, double beta) {
  const double eta = X[0], dl = X[1], zr = X[2], zi = X[3];
  const double w = eta + (3.0 - beta) * dl;
  return Vec4(0.0, 0.0, w * zi,
              -w * zr - 2.0 * M * dl * dl - 4.0 * M * eta * dl + dl * dl * dl + 3.0 * eta * dl * dl);
}

/// Eigenvector of A for the eigenvalue nu + sigma, normalised to eta = 1.
inline Vec4 sigma_direction(const AsymptoticConstants& k) {
  const double nu = k.nu, s = k.sigma, w = 2.0 * k.M + k.alpha;
  return Vec4(1.0, (s - nu) / (s + nu), w * (nu - s) / (2.0 * s), (nu - s) / 2.0);
}

struct AsymptoticCharge {
  double eta_inf = 1.0;
  double theta = 0.0;
  double phi = 0.0;
};

inline void to_json(nlohmann::json& j, const AsymptoticCharge& q) {
  j = {{"eta_inf", q.eta_inf}, {"theta", q.theta}, {"phi", q.phi}};
}

struct TailOptions {
  double step_factor = 0.05;  // h = step_factor / (nu + sigma)
  double cutoff = 1e-16;      // relative size of the dropped integrand
  double smallness = 1e-3;    // eta_inf e^{-(nu+sigma)T} must stay below smallness * M
  double tol = 1e-15;
  int max_iter = 100;
};

struct TailSolution {
  ReducedState at_T;  // scattering chart
  Vec4 X_T = Vec4::Zero();
  Vec4 linear_T = Vec4::Zero();  // e^{-TA} X_inf
  int iterations = 0;
  double contraction = 0.0;
  std::vector<double> times;
  std::vector<Vec4> X;
};

/// Fixed point of X(t) = e^{-tA} X_inf - int_t^inf e^{(s-t)A} Q(X(s)) ds on
/// [T, inf), with X_inf = eta_inf times the nu + sigma eigenvector.
inline TailSolution scatter_tail_solve(double eta_inf, double nu, double alpha, double beta,
                                       double M, double T, const TailOptions& opt = {}) {
  if (eta_inf < 0.0) throw Error(ErrorKind::Validation, "eta_inf must be >= 0");
  const auto k = constants(nu, alpha, beta, M);
  const double lam = nu + k.sigma;
  TailSolution sol;
  if (eta_inf * std::exp(-lam * T) >= opt.smallness * M)
    throw Error(ErrorKind::NoContraction, "eta_inf e^{-(nu+sigma)T} is not small; increase T");

  const Vec4 X_inf = eta_inf * sigma_direction(k);
  const double h = opt.step_factor / lam;
  // The integrand decays at least like e^{-(2 lam - max Re d) s} = e^{-lam s}.
  const auto J = static_cast<std::size_t>(std::ceil(-std::log(opt.cutoff) / (lam * h))) + 1;
  sol.times.resize(J + 1);
  for (std::size_t j = 0; j <= J; ++j) sol.times[j] = T + static_cast<double>(j) * h;

  std::vector<Vec4> lin(J + 1);
  for (std::size_t j = 0; j <= J; ++j) lin[j] = std::exp(-lam * sol.times[j]) * X_inf;
  sol.linear_T = lin[0];
  sol.X = lin;
  if (eta_inf == 0.0) {
    sol.at_T = from_vec(Vec4::Zero().eval(), Chart::Scatter, M);
    return sol;
  }

  Eigen::EigenSolver<Mat4> es(matrix_A(nu, alpha, M));
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Eigensolver, "4x4 eigensolver failed");
  const Eigen::Matrix4cd V = es.eigenvectors();
  const Eigen::Matrix4cd Vinv = V.inverse();
  const Eigen::Vector4cd d = es.eigenvalues();

  // Linear interpolation of q on each cell: int_0^h e^{sd} q(s) ds is
  // w0 q(0) + w1 q(h) with w1 = h psi(hd), w0 = h (phi(hd) - psi(hd)),
  // phi(z) = (e^z - 1)/z and psi(z) = int_0^1 tau e^{z tau} dtau.
  Eigen::Vector4cd w0, w1, ehd;
  for (int i = 0; i < 4; ++i) {
    const cplx z = d[i] * h;
    cplx phi, psi;
    if (std::abs(z) < 1e-3) {
      phi = 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
      psi = 0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0;
    } else {
      phi = (std::exp(z) - 1.0) / z;
      psi = std::exp(z) / z - phi / z;
    }
    ehd[i] = std::exp(z);
    w1[i] = h * psi;
    w0[i] = h * (phi - psi);
  }

  const auto weighted = [&](const std::vector<Vec4>& Y) {
    double m = 0.0;
    for (std::size_t j = 0; j <= J; ++j) m = std::max(m, std::exp(lam * sol.times[j]) * Y[j].norm());
    return m;
  };

  std::vector<Eigen::Vector4cd> q(J + 1);
  std::vector<Vec4> next(J + 1);
  double prev_diff = 0.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (std::size_t j = 0; j <= J; ++j) q[j] = Vinv * Q_term(sol.X[j], M, beta).cast<cplx>();
    Eigen::Vector4cd I = Eigen::Vector4cd::Zero();
    next[J] = lin[J];
    for (std::size_t j = J; j-- > 0;) {
      I = w0.cwiseProduct(q[j]) + w1.cwiseProduct(q[j + 1]) + ehd.cwiseProduct(I);
      next[j] = lin[j] - (V * I).real();
    }
    std::vector<Vec4> diff(J + 1);
    for (std::size_t j = 0; j <= J; ++j) diff[j] = next[j] - sol.X[j];
    const double dn = weighted(diff);
    sol.X.swap(next);
    sol.iterations = it;
    if (it >= 2 && prev_diff > 0.0) {
      sol.contraction = dn / prev_diff;
      if (it >= 3 && sol.contraction > 0.5 && dn > opt.tol * weighted(sol.X))
        throw Error(ErrorKind::NoContraction,
                    "fixed-point contraction factor " + std::to_string(sol.contraction));
    }
    prev_diff = dn;
    if (dn <= opt.tol * weighted(sol.X)) break;
    if (it == opt.max_iter)
      throw Error(ErrorKind::NoContraction, "fixed point did not settle in max_iter iterations");
  }
  sol.X_T = sol.X[0];
  sol.at_T = from_vec(sol.X_T, Chart::Scatter, M);
  return sol;
}

// Points of the stable set, built by shooting backward from the asymptotic
// regime.

struct SigmaOptions {
  double rel_tol = 1e-12;
  double abs_tol = 1e-16;
  double sample_dt = 0.05;
  double mass_tol = 1e-8;       // relative to M
  double rate_tol = 0.02;       // relative
  double fit_from = 0.25;       // fit window starts at fit_from * T
  bool verify = true;
};

struct SigmaPoint {
  RankOneState state;  // at t = 0
  RankOneState seed;   // at t = T
  AsymptoticConstants k;
  std::vector<double> times;
  std::vector<RankOneState> forward;
  FitResult dist_fit;
  FitResult eta_fit;
  double min_mass_margin = 0.0;  // min over samples of mass - M
};

/// Leading-order state at time T for the given charge. The momentum is set
/// to exactly M by the choice |c| = sqrt(M)(1 - |p|^2).
inline RankOneState sigma_seed(const AsymptoticCharge& ch, const AsymptoticConstants& k, double T) {
  const cplx I{0.0, 1.0};
  const double nu = k.nu, al = k.alpha, be = k.beta, M = k.M, s = k.sigma;
  const double lam = nu + s;
  const double w = 2.0 * M + al;
  const double omega_b = w * lam / (2.0 * s);
  const double omega_p = ((al + 2.0 * M * be) * s + w * nu) / (2.0 * s);
  const cplx K = (k.varsigma * k.rho - al + I * (nu - s)) / (2.0 * M) - 1.0;
  RankOneState st;
  const double amp = std::sqrt(ch.eta_inf) * std::exp(-0.5 * lam * T);
  st.b = amp * std::exp(I * (ch.phi - T * omega_b));
  st.p = amp / std::sqrt(M) * std::conj(K) * std::exp(I * (T * omega_p + ch.theta - ch.phi));
  st.c = std::sqrt(M) * (1.0 - std::norm(st.p)) * std::exp(I * (ch.theta - T * M * (1.0 - be)));
  return st;
}

inline SigmaPoint construct_sigma_point(const AsymptoticCharge& ch, double nu, double alpha,
                                        double beta, double M, double T,
                                        const SigmaOptions& opt = {}) {
  if (!(ch.eta_inf > 0.0)) throw Error(ErrorKind::Validation, "eta_inf must be > 0");
  if (!(T > 0.0)) throw Error(ErrorKind::Validation, "T must be > 0");
  SigmaPoint sp;
  sp.k = constants(nu, alpha, beta, M);
  const double lam = nu + sp.k.sigma;
  if (ch.eta_inf * std::exp(-lam * T) >= 1e-3 * M)
    throw Error(ErrorKind::NoContraction, "eta_inf e^{-(nu+sigma)T} is not small; increase T");

  Params par;
  par.nu = nu;
  par.alpha = alpha;
  par.beta = beta;
  OdeOptions oo;
  oo.rel_tol = opt.rel_tol;
  oo.abs_tol = opt.abs_tol;

  sp.seed = sigma_seed(ch, sp.k, T);
  const double back[2] = {T, 0.0};
  const auto bt = evolve_bcp_at(sp.seed, par, std::span<const double>(back, 2), oo);
  sp.state = bt.states.back();
  if (!opt.verify) return sp;

  const auto ts = uniform_times(0.0, T, opt.sample_dt);
  const auto fw = evolve_bcp_at(sp.state, par, ts, oo);
  sp.times = fw.times;
  sp.forward = fw.states;
  std::vector<double> dist, eta;
  sp.min_mass_margin = std::numeric_limits<double>::infinity();
  for (const auto& s : sp.forward) {
    dist.push_back(dist_to_CM(s));
    eta.push_back(std::norm(s.b));
    sp.min_mass_margin = std::min(sp.min_mass_margin, s.mass() - M);
  }
  if (sp.min_mass_margin < -opt.mass_tol * M)
    throw Error(ErrorKind::SigmaCheckFailed,
                "mass fell below M by " + std::to_string(-sp.min_mass_margin));
  sp.dist_fit = fit_exp_rate(sp.times, dist, opt.fit_from * T, T);
  sp.eta_fit = fit_exp_rate(sp.times, eta, opt.fit_from * T, T);
  const double want = 0.5 * lam;
  if (std::abs(sp.dist_fit.rate - want) > opt.rate_tol * want)
    throw Error(ErrorKind::SigmaCheckFailed, "distance decays at rate " +
                                                 std::to_string(sp.dist_fit.rate) +
                                                 ", expected " + std::to_string(want));
  return sp;
}

}  // namespace szego
