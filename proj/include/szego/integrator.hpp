#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "szego/dopri.hpp"
#include "szego/mode_vector.hpp"
#include "szego/spectral.hpp"

namespace szego {

enum class RunStatus { Completed, TruncationBreach };

inline const char* to_string(RunStatus s) {
  return s == RunStatus::Completed ? "Completed" : "TruncationBreach";
}

/// Sampled PDE run with per-sample diagnostics.
struct Trajectory {
  Params params;
  std::vector<double> sobolev_s;
  std::vector<double> times;
  std::vector<ModeVector> states;  // empty unless requested
  std::vector<double> mass;
  std::vector<double> momentum;
  std::vector<double> mean_abs;
  std::vector<std::vector<double>> sobolev;  // sobolev[i][j]: s = sobolev_s[i] at sample j
  std::vector<double> tail_fraction;
  RunStatus status = RunStatus::Completed;
  std::string message;
  OdeStats stats;

  std::size_t size() const { return times.size(); }
  bool breached() const { return status == RunStatus::TruncationBreach; }
};

struct EvolveOptions {
  std::vector<double> sobolev_s{1.0};
  bool store_states = true;
  double tail_guard = 1e-4;
  double max_step = 0.1;
};

namespace detail {

inline void record(Trajectory& tr, double t, const ModeVector& u, bool keep_state) {
  tr.times.push_back(t);
  if (keep_state) tr.states.push_back(u);
  tr.mass.push_back(szego::mass(u));
  tr.momentum.push_back(szego::momentum(u));
  tr.mean_abs.push_back(std::abs(szego::mean(u)));
  for (std::size_t i = 0; i < tr.sobolev_s.size(); ++i)
    tr.sobolev[i].push_back(sobolev_sq(u, tr.sobolev_s[i]));
  tr.tail_fraction.push_back(szego::tail_fraction(u));
}

}  // namespace detail

/// Integrate the truncated PDE from u0 over explicit output times. The run
/// stops, flagged, as soon as the tail fraction exceeds the guard.
inline Trajectory evolve_at(const ModeVector& u0, const Params& p, std::span<const double> times,
                            const EvolveOptions& opt = {}) {
  p.validate();
  if (u0.size() != p.N)
    throw Error(ErrorKind::Validation, "initial state has " + std::to_string(u0.size()) +
                                           " modes, params.N = " + std::to_string(p.N));
  Trajectory tr;
  tr.params = p;
  tr.sobolev_s = opt.sobolev_s;
  tr.sobolev.assign(opt.sobolev_s.size(), {});

  OdeOptions oo;
  oo.rel_tol = p.rel_tol;
  oo.abs_tol = p.abs_tol;
  oo.max_step = opt.max_step;

  auto f = [&p](double, const ModeVector& u) { return rhs_full(u, p); };
  auto observe = [&](double t, const ModeVector& u) {
    detail::record(tr, t, u, opt.store_states);
    return true;
  };
  auto guard = [&](double t, const ModeVector& u) {
    const double tf = szego::tail_fraction(u);
    if (tf > opt.tail_guard) {
      tr.status = RunStatus::TruncationBreach;
      std::ostringstream os;
      os << "tail fraction " << tf << " exceeds " << opt.tail_guard << " at t=" << t;
      tr.message = os.str();
      detail::record(tr, t, u, opt.store_states);
      return false;
    }
    return true;
  };
  tr.stats = integrate(f, u0, times, oo, observe, guard);
  return tr;
}

inline Trajectory evolve(const ModeVector& u0, const Params& p, double t_end, double sample_dt,
                         const EvolveOptions& opt = {}) {
  if (!(t_end > 0.0)) throw Error(ErrorKind::Validation, "t_end must be > 0");
  if (!(sample_dt > 0.0)) throw Error(ErrorKind::Validation, "sample_dt must be > 0");
  const auto ts = uniform_times(0.0, t_end, sample_dt);
  return evolve_at(u0, p, ts, opt);
}

/// Largest mismatch, over interior samples, between the central difference
/// of the mass and -2 nu |(u|1)|^2, relative to the initial mass.
inline double lyapunov_residual(const Trajectory& tr) {
  if (tr.size() < 3) throw Error(ErrorKind::InsufficientSamples, "need at least 3 samples");
  const double m0 = tr.mass.front();
  double worst = 0.0;
  for (std::size_t j = 1; j + 1 < tr.size(); ++j) {
    const double dm = (tr.mass[j + 1] - tr.mass[j - 1]) / (tr.times[j + 1] - tr.times[j - 1]);
    const double r = std::abs(dm + 2.0 * tr.params.nu * tr.mean_abs[j] * tr.mean_abs[j]);
    worst = std::max(worst, r);
  }
  return m0 > 0.0 ? worst / m0 : worst;
}

inline double momentum_drift(const Trajectory& tr) {
  const double m0 = tr.momentum.front();
  double worst = 0.0;
  for (double m : tr.momentum) worst = std::max(worst, std::abs(m - m0));
  return m0 > 0.0 ? worst / m0 : worst;
}

/// Largest increase of the mass between consecutive samples.
inline double mass_increase(const Trajectory& tr) {
  double worst = 0.0;
  for (std::size_t j = 1; j < tr.size(); ++j)
    worst = std::max(worst, tr.mass[j] - tr.mass[j - 1]);
  return worst;
}

/// Trapezoid rule for the integral of |(u|1)|^2 over the samples.
inline double mean_sq_integral(const Trajectory& tr) {
  double s = 0.0;
  for (std::size_t j = 1; j < tr.size(); ++j) {
    const double a = tr.mean_abs[j - 1], b = tr.mean_abs[j];
    s += 0.5 * (a * a + b * b) * (tr.times[j] - tr.times[j - 1]);
  }
  return s;
}

inline std::string sobolev_column(double s) {
  std::ostringstream os;
  os << "hs_" << s;
  return os.str();
}

inline void write_csv(const Trajectory& tr, std::ostream& os) {
  os << "t,mass,momentum,mean_abs";
  for (double s : tr.sobolev_s) os << ',' << sobolev_column(s);
  os << ",tail_fraction\n";
  os << std::setprecision(17);
  for (std::size_t j = 0; j < tr.size(); ++j) {
    os << tr.times[j] << ',' << tr.mass[j] << ',' << tr.momentum[j] << ',' << tr.mean_abs[j];
    for (const auto& col : tr.sobolev) os << ',' << col[j];
    os << ',' << tr.tail_fraction[j] << '\n';
  }
}

inline nlohmann::json states_json(const Trajectory& tr) {
  nlohmann::json j;
  j["times"] = tr.times;
  j["states"] = tr.states;
  j["status"] = to_string(tr.status);
  j["params"] = tr.params;
  return j;
}

}  // namespace szego
