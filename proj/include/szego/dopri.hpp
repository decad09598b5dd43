#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "szego/error.hpp"
#include "szego/mode_vector.hpp"

namespace szego {

/// Vector-space operations the stepper needs from a state type.
template <class S>
struct StateOps;

template <>
struct StateOps<ModeVector> {
  static void axpy(ModeVector& y, double a, const ModeVector& x) {
    auto yc = y.coeffs();
    auto xc = x.coeffs();
    for (std::size_t k = 0; k < yc.size(); ++k) yc[k] += a * xc[k];
  }
  static double err_norm(const ModeVector& e, const ModeVector& y0, const ModeVector& y1,
                         double rtol, double atol) {
    double m = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
      const double sc = atol + rtol * std::max(std::abs(y0[k]), std::abs(y1[k]));
      m = std::max(m, std::abs(e[k]) / sc);
    }
    return m;
  }
  static bool finite(const ModeVector& y) { return y.all_finite(); }
};

template <class Scalar, int Rows>
struct StateOps<Eigen::Matrix<Scalar, Rows, 1>> {
  using V = Eigen::Matrix<Scalar, Rows, 1>;
  static void axpy(V& y, double a, const V& x) { y += a * x; }
  static double err_norm(const V& e, const V& y0, const V& y1, double rtol, double atol) {
    double m = 0.0;
    for (Eigen::Index k = 0; k < e.size(); ++k) {
      const double sc = atol + rtol * std::max(std::abs(y0[k]), std::abs(y1[k]));
      m = std::max(m, std::abs(e[k]) / sc);
    }
    return m;
  }
  static bool finite(const V& y) { return y.allFinite(); }
};

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  double max_step = 0.1;
  double initial_step = 0.0;  // 0 selects a step from the initial slope
  std::size_t max_steps = 100'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
  bool stopped_early = false;
  double t_final = 0.0;
};

/// Output times t0 + i*dt up to t_end inclusive (dt may be negative).
inline std::vector<double> uniform_times(double t0, double t_end, double dt) {
  if (dt == 0.0 || (t_end - t0) * dt < 0.0)
    throw Error(ErrorKind::Validation, "sample step must point from t0 towards t_end");
  std::vector<double> ts;
  const auto n = static_cast<std::size_t>(std::floor((t_end - t0) / dt + 1e-9));
  ts.reserve(n + 2);
  for (std::size_t i = 0; i <= n; ++i) ts.push_back(t0 + static_cast<double>(i) * dt);
  if (std::abs(ts.back() - t_end) > 1e-12 * std::max(1.0, std::abs(t_end))) ts.push_back(t_end);
  else ts.back() = t_end;
  return ts;
}

/// n log-spaced output times between t_lo > 0 and t_hi, preceded by t0.
inline std::vector<double> log_times(double t0, double t_lo, double t_hi, std::size_t n) {
  std::vector<double> ts{t0};
  const double a = std::log(t_lo), b = std::log(t_hi);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    if (t > ts.back()) ts.push_back(t);
  }
  ts.back() = t_hi;
  return ts;
}

/// Dormand-Prince 5(4) with a PI step-size controller. Every entry of
/// `times` is hit exactly; `observe(t, y)` is called there (including
/// times[0]) and may return false to stop. `on_step(t, y)` runs after every
/// accepted step and may also return false.
template <class S, class F, class Observe, class OnStep>
OdeStats integrate(F&& f, S y, std::span<const double> times, const OdeOptions& opt,
                   Observe&& observe, OnStep&& on_step) {
  using Ops = StateOps<S>;
  OdeStats st;
  if (times.empty()) return st;
  double t = times.front();
  st.t_final = t;
  if (!observe(t, y)) {
    st.stopped_early = true;
    return st;
  }
  if (times.size() == 1) return st;
  const double dir = times.back() >= times.front() ? 1.0 : -1.0;

  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                   a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  // PI controller constants as in Hairer's DOPRI5.
  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  constexpr double fac_min = 0.2, fac_max = 10.0;

  S k1 = f(t, y);
  ++st.evaluations;

  double h = opt.initial_step;
  if (h <= 0.0) {
    const double d0 = Ops::err_norm(y, y, y, opt.rel_tol, opt.abs_tol);
    const double d1 = Ops::err_norm(k1, y, y, opt.rel_tol, opt.abs_tol);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  }
  h = std::min(h, opt.max_step);
  double facold = 1e-4;

  S tmp = y, k2 = y, k3 = y, k4 = y, k5 = y, k6 = y, k7 = y, ynew = y, err = y;
  auto stage = [&](S& out, double hh, std::initializer_list<std::pair<double, const S*>> terms) {
    out = y;
    for (const auto& [a, k] : terms)
      if (a != 0.0) Ops::axpy(out, hh * a, *k);
  };

  for (std::size_t idx = 1; idx < times.size(); ++idx) {
    const double target = times[idx];
    while (dir * (target - t) > 0.0) {
      if (st.accepted + st.rejected >= opt.max_steps)
        throw Error(ErrorKind::NonFiniteState, "step budget exhausted at t=" + std::to_string(t));
      const double remaining = dir * (target - t);
      const bool clipped = h >= remaining;
      const double hs = dir * (clipped ? remaining : h);

      stage(tmp, hs, {{a21, &k1}});
      k2 = f(t + c2 * hs, tmp);
      stage(tmp, hs, {{a31, &k1}, {a32, &k2}});
      k3 = f(t + c3 * hs, tmp);
      stage(tmp, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
      k4 = f(t + c4 * hs, tmp);
      stage(tmp, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
      k5 = f(t + c5 * hs, tmp);
      stage(tmp, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
      k6 = f(t + hs, tmp);
      stage(ynew, hs, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
      k7 = f(t + hs, ynew);
      st.evaluations += 6;

      err = k1;
      Ops::axpy(err, e1 - 1.0, k1);  // err = e1*k1
      Ops::axpy(err, e3, k3);
      Ops::axpy(err, e4, k4);
      Ops::axpy(err, e5, k5);
      Ops::axpy(err, e6, k6);
      Ops::axpy(err, e7, k7);
      double en = Ops::err_norm(err, y, ynew, opt.rel_tol, opt.abs_tol) * std::abs(hs);
      if (!std::isfinite(en)) en = 1e10;

      const double fac11 = std::pow(std::max(en, 1e-300), expo1);
      if (en <= 1.0) {
        double fac = fac11 / std::pow(facold, beta);
        fac = std::clamp(fac / safe, 1.0 / fac_max, 1.0 / fac_min);
        facold = std::max(en, 1e-4);
        if (!Ops::finite(ynew))
          throw Error(ErrorKind::NonFiniteState, "non-finite state at t=" + std::to_string(t + hs));
        t = clipped ? target : t + hs;
        y = ynew;
        k1 = k7;
        ++st.accepted;
        const double hnew = std::min(std::abs(hs) / fac, opt.max_step);
        // A step shortened to land on an output time does not shrink h.
        h = clipped ? std::max(h, hnew) : hnew;
        if (!on_step(t, y)) {
          st.stopped_early = true;
          st.t_final = t;
          return st;
        }
      } else {
        h = std::abs(hs) / std::min(1.0 / fac_min, fac11 / safe);
        ++st.rejected;
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t)))
        throw Error(ErrorKind::NonFiniteState, "step size underflow at t=" + std::to_string(t));
    }
    st.t_final = t;
    if (!observe(t, y)) {
      st.stopped_early = true;
      return st;
    }
  }
  return st;
}

template <class S, class F, class Observe>
OdeStats integrate(F&& f, S y, std::span<const double> times, const OdeOptions& opt,
                   Observe&& observe) {
  return integrate(std::forward<F>(f), std::move(y), times, opt, std::forward<Observe>(observe),
                   [](double, const S&) { return true; });
}

}  // namespace szego
