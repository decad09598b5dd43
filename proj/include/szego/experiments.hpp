#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "szego/fit.hpp"
#include "szego/hankel.hpp"
#include "szego/integrator.hpp"
#include "szego/rank_one.hpp"

namespace szego {

// Long runs on the reduced blow-up chart.

struct KappaReport {
  double kappa = 0.0;  // closed form
  std::vector<double> times;
  std::vector<double> t_gamma;
  ReducedTrajectory run;

  double final_ratio() const { return t_gamma.empty() ? 0.0 : t_gamma.back() / kappa; }
};

inline OdeOptions long_run_options() {
  OdeOptions o;
  o.rel_tol = 1e-11;
  o.abs_tol = 1e-16;
  return o;
}

/// Integrates the blow-up chart from (eta0, gamma = M, zeta = 0), that is
/// from b = sqrt(eta0), c = sqrt(M), p = 0, and samples t * gamma(t) at
/// n log-spaced times in [1, t_end].
inline KappaReport kappa_check(double nu, double alpha, double beta, double M, double eta0,
                               double t_end, std::size_t n = 400) {
  if (!(t_end > 1.0)) throw Error(ErrorKind::Validation, "t_end must be > 1");
  if (!(eta0 > 0.0)) throw Error(ErrorKind::Validation, "eta0 must be > 0 (off the circle)");
  KappaReport rep;
  rep.kappa = constants(nu, alpha, beta, M).kappa;
  Params par;
  par.nu = nu;
  par.alpha = alpha;
  par.beta = beta;
  ReducedState r0;
  r0.chart = Chart::BlowUp;
  r0.M = M;
  r0.eta = eta0;
  r0.second = M;
  const auto ts = log_times(0.0, 1.0, t_end, n);
  rep.run = evolve_reduced_at(r0, par, ts, long_run_options());
  for (std::size_t j = 1; j < rep.run.times.size(); ++j) {
    rep.times.push_back(rep.run.times[j]);
    rep.t_gamma.push_back(rep.run.times[j] * rep.run.states[j].gamma());
  }
  return rep;
}

namespace detail {

inline std::pair<std::vector<double>, std::vector<double>> hs_series(const ReducedTrajectory& tr,
                                                                     double s) {
  std::vector<double> t, y;
  for (std::size_t j = 0; j < tr.times.size(); ++j) {
    if (tr.times[j] <= 0.0) continue;
    const auto& r = tr.states[j];
    t.push_back(tr.times[j]);
    y.push_back(sobolev_from_gamma(r.M, r.gamma(), s));
  }
  return {t, y};
}

}  // namespace detail

/// Power-law fit of ||u||_{H^s}^2, evaluated from gamma, on [t_lo, t_hi].
inline FitResult blowup_fit(const ReducedTrajectory& tr, double s, double t_lo, double t_hi) {
  const auto [t, y] = detail::hs_series(tr, s);
  return fit_power_law(t, y, t_lo, t_hi);
}

/// Prefactor of ||u||_{H^s}^2 ~ a^2 t^{2s-1} with the exponent held at 2s - 1.
inline FitResult blowup_amplitude(const ReducedTrajectory& tr, double s, double t_lo, double t_hi) {
  const auto [t, y] = detail::hs_series(tr, s);
  return fit_amplitude(t, y, 2.0 * s - 1.0, t_lo, t_hi);
}

// Stationary data for beta = 1.

struct RhoSolution {
  double rho1 = 0.0, rho2 = 0.0, rho3 = 0.0;
  double sigma1 = 0.0, sigma2 = 0.0, eps = 0.0;
  int iterations = 0;
  double max_residual = 0.0;  // max |P(rho_j) -/+ eps|

  double sum_sq() const { return rho1 * rho1 + rho2 * rho2 + rho3 * rho3; }
};

inline void to_json(nlohmann::json& j, const RhoSolution& r) {
  j = {{"rho", {r.rho1, r.rho2, r.rho3}},
       {"sigma", {r.sigma1, r.sigma2}},
       {"eps", r.eps},
       {"sum_sq", r.sum_sq()},
       {"iterations", r.iterations},
       {"max_residual", r.max_residual}};
}

inline double rho_poly(double x, double s1, double s2) {
  return x * (x * x - s1 * s1) * (x * x - s2 * s2);
}

inline double rho_poly_prime(double x, double s1, double s2) {
  const double a = s1 * s1, b = s2 * s2;
  return 5.0 * x * x * x * x - 3.0 * (a + b) * x * x + a * b;
}

/// Squared norm of the projection of u on the j-th eigenspace of H_u^2 in
/// terms of the singular values.
inline double projection_norm_sq(const RhoSolution& r, int j) {
  const double rho[3] = {r.rho1, r.rho2, r.rho3};
  const double x = rho[j] * rho[j];
  double den = 1.0;
  for (int k = 0; k < 3; ++k)
    if (k != j) den *= x - rho[k] * rho[k];
  return (x - r.sigma1 * r.sigma1) * (x - r.sigma2 * r.sigma2) * x / den;
}

/// Residuals of rho_2|u_2|^2 = rho_1|u_1|^2 + rho_3|u_3|^2 and of the same
/// balance with 1/rho, each relative to its largest term.
inline std::pair<double, double> balance_residuals(const RhoSolution& r) {
  const double n1 = projection_norm_sq(r, 0), n2 = projection_norm_sq(r, 1),
               n3 = projection_norm_sq(r, 2);
  const double a = r.rho2 * n2 - r.rho1 * n1 - r.rho3 * n3;
  const double sa = std::max({r.rho1 * n1, r.rho2 * n2, r.rho3 * n3});
  const double b = n2 / r.rho2 - n1 / r.rho1 - n3 / r.rho3;
  const double sb = std::max({n1 / r.rho1, n2 / r.rho2, n3 / r.rho3});
  return {std::abs(a) / sa, std::abs(b) / sb};
}

inline RhoSolution stationary_rho_solver(double sigma1, double sigma2, double eps,
                                         int max_iter = 50) {
  if (!(sigma1 > sigma2 && sigma2 > 0.0))
    throw Error(ErrorKind::Validation, "need sigma1 > sigma2 > 0");
  if (!(eps > 0.0)) throw Error(ErrorKind::Validation, "eps must be > 0");
  RhoSolution r;
  r.sigma1 = sigma1;
  r.sigma2 = sigma2;
  r.eps = eps;
  const double seeds[3] = {sigma1, sigma2, 0.0};
  const double targets[3] = {eps, -eps, eps};
  double out[3];
  const double scale = std::pow(sigma1, 5);
  for (int i = 0; i < 3; ++i) {
    double x = seeds[i];
    bool done = false;
    for (int it = 0; it < max_iter; ++it) {
      const double f = rho_poly(x, sigma1, sigma2) - targets[i];
      const double d = rho_poly_prime(x, sigma1, sigma2);
      if (!std::isfinite(f) || d == 0.0) break;
      const double step = f / d;
      x -= step;
      r.iterations = std::max(r.iterations, it + 1);
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x)) &&
          std::abs(rho_poly(x, sigma1, sigma2) - targets[i]) <= 1e-13 * scale) {
        done = true;
        break;
      }
    }
    if (!done || !std::isfinite(x))
      throw Error(ErrorKind::NewtonDiverged, "Newton did not converge for root " + std::to_string(i + 1));
    out[i] = x;
    r.max_residual = std::max(r.max_residual, std::abs(rho_poly(x, sigma1, sigma2) - targets[i]));
  }
  r.rho1 = out[0];
  r.rho2 = out[1];
  r.rho3 = out[2];
  if (!(r.rho1 > sigma1 && sigma1 > r.rho2 && r.rho2 > sigma2 && sigma2 > r.rho3 && r.rho3 > 0.0))
    throw Error(ErrorKind::OrderingViolated, "rho1 > sigma1 > rho2 > sigma2 > rho3 > 0 fails");
  if (!(r.sum_sq() < 2.0 * sigma1 * sigma1))
    throw Error(ErrorKind::InequalityViolated, "rho1^2 + rho2^2 + rho3^2 >= 2 sigma1^2; eps too large");
  return r;
}

/// (u | Pi|u|^2) for u with vanishing mean, as the exact cubic form
/// sum_{j,k >= 1} u_j u_k conj(u_{j+k}).
inline cplx cubic_form(const ModeVector& u) {
  cplx g{};
  const std::size_t n = u.size();
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t k = 1; j + k < n; ++k) g += u[j] * u[k] * std::conj(u[j + k]);
  return g;
}

struct StationaryConstraints {
  int max_seeds = 200;
  int newton_iter = 60;
  double tol = 1e-10;             // on |(u|1)| and |(u|Pi|u|^2)|
  double min_margin = 1e-3;       // (F - mass) / mass
  double seed_decay = 0.6;        // seed amplitude ratio between modes
  std::size_t N = 256;            // modes used for spectra and the rhs check
  bool confirm_growth = false;
  std::size_t growth_N = 2048;
  double growth_t_end = 100.0;
  double growth_sample_dt = 0.05;
  double growth_factor = 10.0;
};

struct GrowthReport {
  bool confirmed = false;
  double ratio = 0.0;  // max H^1 norm over initial
  double t_reached = 0.0;
  bool breached = false;
  bool monotone = true;
};

struct StationaryCandidate {
  ModeVector u;
  double residual_mean = 0.0;
  double residual_cubic = 0.0;
  double rhs_norm = 0.0;  // ||rhs_full(u)|| at beta = 1
  OmegaReport omega;
  double margin = 0.0;  // (F - mass) / mass
  std::size_t shifted_rank = 0;
  int seed_index = -1;
  int accepted_seeds = 0;
  std::optional<RhoSolution> rho;
  std::optional<GrowthReport> growth;
};

inline void to_json(nlohmann::json& j, const StationaryCandidate& c) {
  j = {{"u", c.u},
       {"residual_mean", c.residual_mean},
       {"residual_cubic", c.residual_cubic},
       {"rhs_norm", c.rhs_norm},
       {"omega", to_string(c.omega.verdict)},
       {"mass", c.omega.mass},
       {"F", c.omega.F},
       {"margin", c.margin},
       {"shifted_rank", c.shifted_rank},
       {"seed_index", c.seed_index},
       {"seeds_in_omega", c.accepted_seeds}};
  if (c.rho) j["rho_route"] = *c.rho;
  if (c.growth)
    j["growth"] = {{"confirmed", c.growth->confirmed}, {"ratio", c.growth->ratio},
                   {"t_reached", c.growth->t_reached}, {"breached", c.growth->breached},
                   {"monotone", c.growth->monotone}};
}

namespace detail {

// Real-variable Newton step with minimum norm onto g(a) = 0 for
// u = sum_{k=1}^K a_k e^{ikx}. With A_m = dg/da_m = 2 sum_k a_k conj(a_{m+k})
// and B_m = dg/dconj(a_m) = sum_{j+k=m} a_j a_k, the real partials are
// dg/dx_m = A_m + B_m and dg/dy_m = i(A_m - B_m).
inline bool project_cubic(std::vector<cplx>& a, int iters, double tol) {
  const std::size_t K = a.size() - 1;
  for (int it = 0; it < iters; ++it) {
    cplx g{};
    for (std::size_t j = 1; j <= K; ++j)
      for (std::size_t k = 1; j + k <= K; ++k) g += a[j] * a[k] * std::conj(a[j + k]);
    double nrm = 0.0;
    for (std::size_t k = 1; k <= K; ++k) nrm += std::norm(a[k]);
    if (std::abs(g) <= tol * std::pow(nrm, 1.5)) return true;
    Eigen::MatrixXd J(2, 2 * K);
    for (std::size_t m = 1; m <= K; ++m) {
      cplx A{}, B{};
      for (std::size_t k = 1; m + k <= K; ++k) A += 2.0 * a[k] * std::conj(a[m + k]);
      for (std::size_t j = 1; j < m; ++j) B += a[j] * a[m - j];
      const cplx dx = A + B, dy = cplx(0.0, 1.0) * (A - B);
      J(0, static_cast<Eigen::Index>(m - 1)) = dx.real();
      J(1, static_cast<Eigen::Index>(m - 1)) = dx.imag();
      J(0, static_cast<Eigen::Index>(K + m - 1)) = dy.real();
      J(1, static_cast<Eigen::Index>(K + m - 1)) = dy.imag();
    }
    const Eigen::Matrix2d JJ = J * J.transpose();
    if (std::abs(JJ.determinant()) < 1e-300) return false;
    const Eigen::VectorXd step = J.transpose() * JJ.inverse() * Eigen::Vector2d(g.real(), g.imag());
    for (std::size_t m = 1; m <= K; ++m)
      a[m] -= cplx(step[static_cast<Eigen::Index>(m - 1)], step[static_cast<Eigen::Index>(K + m - 1)]);
    for (const auto& x : a)
      if (!std::isfinite(std::abs(x))) return false;
  }
  return false;
}

}  // namespace detail

/// Evolves u under beta = 0, nu = 1 (alpha unchanged at 0) and records how
/// far ||u||_{H^1}^2 grows before the tail guard trips.
inline GrowthReport confirm_growth(const ModeVector& u, const StationaryConstraints& c) {
  GrowthReport g;
  Params p;
  p.nu = 1.0;
  p.N = c.growth_N;
  EvolveOptions o;
  o.store_states = false;
  const auto tr = evolve(u.resized(c.growth_N), p, c.growth_t_end, c.growth_sample_dt, o);
  const auto& h1 = tr.sobolev[0];
  double best = h1.front();
  for (std::size_t j = 1; j < h1.size(); ++j) best = std::max(best, h1[j]);
  // Monotone growth is checked on the running maximum of the sampled norm
  // against its last value.
  g.monotone = h1.back() >= 0.999 * best;
  g.ratio = best / h1.front();
  g.t_reached = tr.times.back();
  g.breached = tr.breached();
  g.confirmed = g.ratio >= c.growth_factor;
  return g;
}

/// Seeded multistart search for u with zero mean, (u|Pi|u|^2) = 0 and
/// mass(u) < F(u), over trigonometric polynomials of degree K. Each seed is
/// projected onto the cubic constraint by Newton, normalised to unit mass
/// and scored by (F - mass) / mass; the best admissible seed wins.
inline StationaryCandidate stationary_search(int K, std::uint64_t seed,
                                             const StationaryConstraints& c = {}) {
  if (K < 4) throw Error(ErrorKind::Validation, "K must be >= 4");
  if (2 * static_cast<std::size_t>(K) >= c.N)
    throw Error(ErrorKind::Validation, "N must exceed 2K for the exact cubic check");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::optional<StationaryCandidate> best;
  int admissible = 0;
  for (int s = 0; s < c.max_seeds; ++s) {
    std::vector<cplx> a(static_cast<std::size_t>(K) + 1);
    for (int k = 1; k <= K; ++k) {
      const double amp = std::pow(c.seed_decay, k - 1);
      a[static_cast<std::size_t>(k)] = amp * cplx(g(rng), g(rng));
    }
    if (!detail::project_cubic(a, c.newton_iter, 1e-15)) continue;
    ModeVector u(c.N);
    double m = 0.0;
    for (int k = 1; k <= K; ++k) m += std::norm(a[static_cast<std::size_t>(k)]);
    const double scale = 1.0 / std::sqrt(m);
    for (int k = 1; k <= K; ++k) u[static_cast<std::size_t>(k)] = scale * a[static_cast<std::size_t>(k)];

    StationaryCandidate cand;
    cand.u = u;
    cand.residual_mean = std::abs(mean(u));
    cand.residual_cubic = std::abs(cubic_form(u));
    if (cand.residual_cubic >= c.tol) continue;
    cand.omega = omega_membership(u, c.min_margin * mass(u));
    if (cand.omega.verdict != OmegaVerdict::InOmega) continue;
    ++admissible;
    cand.margin = (cand.omega.F - cand.omega.mass) / cand.omega.mass;
    cand.seed_index = s;
    if (!best || cand.margin > best->margin) best = cand;
  }
  if (!best)
    throw Error(ErrorKind::SearchFailed, "no seed out of " + std::to_string(c.max_seeds) +
                                             " reached a stationary point inside Omega");
  StationaryCandidate out = *best;
  out.accepted_seeds = admissible;
  Params p1;
  p1.beta = 1.0;
  p1.N = c.N;
  out.rhs_norm = std::sqrt(mass(rhs_full(out.u, p1)));
  out.shifted_rank = spectrum(out.u, true).rank();
  if (c.confirm_growth) out.growth = confirm_growth(out.u, c);
  return out;
}

// Classification of rank-one data.

enum class Verdict { Periodic, BlowUp, Scatter, Undetermined };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Periodic: return "Periodic";
    case Verdict::BlowUp: return "BlowUp";
    case Verdict::Scatter: return "Scatter";
    case Verdict::Undetermined: return "Undetermined";
  }
  return "Unknown";
}

struct ClassifyOptions {
  double circle_tol = 1e-12;
  double r2_min = 0.99;
  double exponent_tol = 0.05;  // relative, against 2s - 1 with s = 1
  double kappa_tol = 0.05;
  double scatter_drop = 1e-2;  // distance must fall at least this far
  std::size_t samples = 400;
};

struct Classification {
  Verdict verdict = Verdict::Undetermined;
  std::optional<FitResult> fit;
  double t_gamma = 0.0;  // t * gamma at the horizon
  double kappa = 0.0;    // closed form, when defined
  std::string note;
};

inline void to_json(nlohmann::json& j, const Classification& c) {
  j = {{"verdict", to_string(c.verdict)}, {"t_gamma", c.t_gamma}, {"kappa", c.kappa},
       {"note", c.note}};
  if (c.fit) j["fit"] = *c.fit;
}

inline std::vector<double> classify_times(double horizon, std::size_t n) {
  if (horizon <= 50.0) return uniform_times(0.0, horizon, horizon / static_cast<double>(n));
  auto ts = uniform_times(0.0, 10.0, 0.1);
  const auto lt = log_times(10.0, 10.0 * std::pow(horizon / 10.0, 1.0 / static_cast<double>(n)),
                            horizon, n);
  ts.insert(ts.end(), lt.begin() + 1, lt.end());
  return ts;
}

/// Periodic on the circle; otherwise a reduced chart is run to the horizon. Exponential decay of the distance to the circle gives Scatter,
/// an H^1 power law with exponent 1 and t * gamma near kappa gives BlowUp.
inline Classification classify(const RankOneState& s0, const Params& par, double horizon,
                               const ClassifyOptions& opt = {}) {
  par.validate();
  s0.validate();
  if (!(horizon > 0.0)) throw Error(ErrorKind::Validation, "horizon must be > 0");
  Classification out;
  const double M = s0.momentum();
  try {
    out.kappa = constants(par.nu, par.alpha, par.beta, M).kappa;
  } catch (const Error& e) {
    out.note = e.what();
  }
  if (std::abs(s0.b) <= opt.circle_tol && std::abs(s0.p) <= opt.circle_tol) {
    out.verdict = Verdict::Periodic;
    return out;
  }
  if (s0.c == cplx{}) {
    out.note = "c = 0: not on the rank-one manifold";
    return out;
  }
  const auto ts = classify_times(horizon, opt.samples);
  // Short runs stay on (b, c, p), whose unsquared amplitudes resolve the
  // distance to the circle far below the round-off floor of eta and delta.
  // Long runs use the blow-up chart, which resolves small gamma.
  const bool short_run = horizon <= 50.0;
  std::vector<double> t, dist;
  ReducedTrajectory tr;
  if (short_run) {
    const auto bt = evolve_bcp_at(s0, par, ts, long_run_options());
    for (std::size_t j = 0; j < bt.times.size(); ++j) {
      t.push_back(bt.times[j]);
      dist.push_back(dist_to_CM(bt.states[j]));
    }
    out.t_gamma = bt.times.back() * M * bt.states.back().q();
  } else {
    tr = evolve_reduced_at(to_reduced(s0, Chart::BlowUp), par, ts, long_run_options());
    for (std::size_t j = 0; j < tr.times.size(); ++j) {
      t.push_back(tr.times[j]);
      dist.push_back(std::sqrt(std::max(tr.states[j].eta + tr.states[j].delta(), 0.0)));
    }
    out.t_gamma = tr.times.back() * tr.states.back().gamma();
  }

  const double d0 = *std::max_element(dist.begin(), dist.end());
  if (dist.back() < opt.scatter_drop * d0 && dist.back() > 0.0) {
    try {
      const auto f = fit_exp_rate(t, dist, 0.25 * horizon, horizon);
      if (f.r_squared > opt.r2_min && f.rate > 0.0) {
        out.verdict = Verdict::Scatter;
        out.fit = f;
        return out;
      }
      out.note = "distance decays without a clean exponential";
    } catch (const Error& e) {
      out.note = e.what();
    }
    return out;
  }
  if (!short_run) {
    const auto [lo, hi] = default_window(horizon);
    try {
      const auto f = blowup_fit(tr, 1.0, lo, hi);
      out.fit = f;
      const bool exp_ok = std::abs(f.rate - 1.0) <= opt.exponent_tol && f.r_squared > opt.r2_min;
      const bool kappa_ok =
          out.kappa > 0.0 && std::abs(out.t_gamma / out.kappa - 1.0) <= opt.kappa_tol;
      if (exp_ok && kappa_ok) {
        out.verdict = Verdict::BlowUp;
        return out;
      }
      out.note = "H^1 exponent " + std::to_string(f.rate) + ", t*gamma/kappa " +
                 std::to_string(out.kappa > 0.0 ? out.t_gamma / out.kappa : 0.0);
    } catch (const Error& e) {
      out.note = e.what();
    }
    return out;
  }
  out.note = "horizon too short to separate the regimes";
  return out;
}

/// Recovers (b, c, p) when u is b + c e^{ix}/(1 - p e^{ix}) to the given
/// tolerance on its stored modes.
inline std::optional<RankOneState> as_rank_one(const ModeVector& u, double tol = 1e-10) {
  if (u.size() < 3 || u[1] == cplx{}) return std::nullopt;
  const RankOneState s{u[0], u[1], u[2] / u[1]};
  if (!(std::abs(s.p) < 1.0)) return std::nullopt;
  const auto e = embed(s, u.size());
  if (sup_distance(e, u) > tol * std::max(1.0, std::abs(u[1]))) return std::nullopt;
  return s;
}

inline Classification classify(const ModeVector& u0, const Params& par, double horizon,
                               const ClassifyOptions& opt = {}) {
  if (const auto s = as_rank_one(u0)) return classify(*s, par, horizon, opt);
  Classification out;
  EvolveOptions eo;
  eo.store_states = false;
  const auto tr = evolve(u0, par, horizon, horizon / 200.0, eo);
  std::ostringstream os;
  os << "not rank-one; PDE run reached t=" << tr.times.back() << " ("
     << to_string(tr.status) << "), H^1 ratio "
     << tr.sobolev[0].back() / tr.sobolev[0].front();
  out.note = os.str();
  return out;
}

// Parameter sweeps.

enum class Family { Generic, Periodic, Sigma };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::Generic: return "generic";
    case Family::Periodic: return "periodic";
    case Family::Sigma: return "sigma";
  }
  return "unknown";
}

inline Family family_from_string(const std::string& s) {
  if (s == "generic") return Family::Generic;
  if (s == "periodic") return Family::Periodic;
  if (s == "sigma") return Family::Sigma;
  throw Error(ErrorKind::Validation, "unknown data family: " + s);
}

struct SweepGrid {
  std::vector<double> nu{1.0};
  std::vector<double> alpha{0.0};
  std::vector<double> beta{0.0};
  std::vector<double> M{1.0};
  std::vector<Family> families{Family::Generic};
  double generic_eta0 = 0.09;
  double generic_horizon = 1e4;
  double sigma_T = 8.0;
};

struct SweepRow {
  double nu = 0, alpha = 0, beta = 0, M = 0;
  Family family = Family::Generic;
  Verdict verdict = Verdict::Undetermined;
  double rate = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double a_sq = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

/// Initial datum of momentum M for a family.
inline RankOneState family_datum(Family f, double nu, double alpha, double beta, double M,
                                 const SweepGrid& g) {
  switch (f) {
    case Family::Periodic: return {0.0, std::sqrt(M), 0.0};
    case Family::Generic: return {std::sqrt(g.generic_eta0), std::sqrt(M), 0.0};
    case Family::Sigma: {
      SigmaOptions o;
      o.verify = false;
      return construct_sigma_point({1.0, 0.0, 0.0}, nu, alpha, beta, M, g.sigma_T, o).state;
    }
  }
  return {};
}

inline SweepRow sweep_cell(double nu, double alpha, double beta, double M, Family fam,
                           const SweepGrid& g) {
  SweepRow row;
  row.nu = nu;
  row.alpha = alpha;
  row.beta = beta;
  row.M = M;
  row.family = fam;
  try {
    const auto k = constants(nu, alpha, beta, M, {1.0});
    row.kappa = k.kappa;
    row.a_sq = k.a_sq[0];
    row.sigma = k.sigma;
    Params p;
    p.nu = nu;
    p.alpha = alpha;
    p.beta = beta;
    const auto s0 = family_datum(fam, nu, alpha, beta, M, g);
    const double horizon = fam == Family::Sigma ? g.sigma_T : g.generic_horizon;
    const auto c = classify(s0, p, horizon);
    row.verdict = c.verdict;
    if (c.fit) {
      row.rate = c.fit->rate;
      row.r_squared = c.fit->r_squared;
    }
    if (c.verdict == Verdict::BlowUp) row.kappa = c.t_gamma;  // measured limit of t * gamma
    if (c.verdict == Verdict::Undetermined) row.error = c.note;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

/// Classifies every grid cell on `jobs` worker threads; rows come back in
/// grid order (nu, alpha, beta, M, family, last index fastest).
inline std::vector<SweepRow> sweep(const SweepGrid& g, unsigned jobs = 1) {
  struct Cell {
    double nu, alpha, beta, M;
    Family fam;
  };
  std::vector<Cell> cells;
  for (double nu : g.nu)
    for (double al : g.alpha)
      for (double be : g.beta)
        for (double m : g.M)
          for (Family f : g.families) cells.push_back({nu, al, be, m, f});
  std::vector<SweepRow> rows(cells.size());
  jobs = std::max(1u, jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& c = cells[i];
      rows[i] = sweep_cell(c.nu, c.alpha, c.beta, c.M, c.fam, g);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < jobs; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << "nu,alpha,beta,M,family,verdict,rate,kappa,a_sq,sigma,r_squared,error\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    os << r.nu << ',' << r.alpha << ',' << r.beta << ',' << r.M << ',' << to_string(r.family)
       << ',' << to_string(r.verdict) << ',' << r.rate << ',' << r.kappa << ',' << r.a_sq << ','
       << r.sigma << ',' << r.r_squared << ",\"" << err << "\"\n";
  }
}

}  // namespace szego
