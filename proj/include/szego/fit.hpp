#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "szego/error.hpp"

namespace szego {

struct FitResult {
  double rate = 0.0;  // exponent for power laws, decay rate for exponentials
  double amplitude = 0.0;
  double r_squared = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t samples = 0;
};

inline void to_json(nlohmann::json& j, const FitResult& f) {
  j = {{"rate", f.rate},           {"amplitude", f.amplitude}, {"r_squared", f.r_squared},
       {"window", {f.t_lo, f.t_hi}}, {"samples", f.samples}};
}

inline constexpr std::size_t kMinFitSamples = 20;

namespace detail {

struct Line {
  double slope, intercept, r_squared;
};

inline Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::InsufficientSamples, "fit window has no spread in t");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (intercept + slope * x[i]);
    ssr += r * r;
  }
  double r2 = syy > 0.0 ? 1.0 - ssr / syy : (ssr == 0.0 ? 1.0 : 0.0);
  r2 = std::clamp(r2, 0.0, 1.0);
  return {slope, intercept, r2};
}

template <class Tx>
FitResult fit_log(std::span<const double> t, std::span<const double> y, double t_lo, double t_hi,
                  Tx transform_t) {
  if (t.size() != y.size()) throw Error(ErrorKind::Validation, "t and y lengths differ");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    if (!(y[i] > 0.0))
      throw Error(ErrorKind::Validation, "fit needs y > 0, got " + std::to_string(y[i]) +
                                             " at t=" + std::to_string(t[i]));
    xs.push_back(transform_t(t[i]));
    ys.push_back(std::log(y[i]));
  }
  if (xs.size() < kMinFitSamples)
    throw Error(ErrorKind::InsufficientSamples, "fit window [" + std::to_string(t_lo) + ", " +
                                                    std::to_string(t_hi) + "] has " +
                                                    std::to_string(xs.size()) + " samples");
  const Line l = least_squares(xs, ys);
  FitResult f;
  f.rate = l.slope;
  f.amplitude = std::exp(l.intercept);
  f.r_squared = l.r_squared;
  f.t_lo = t_lo;
  f.t_hi = t_hi;
  f.samples = xs.size();
  return f;
}

}  // namespace detail

/// y ~ amplitude * t^rate on [t_lo, t_hi].
inline FitResult fit_power_law(std::span<const double> t, std::span<const double> y, double t_lo,
                               double t_hi) {
  if (!(t_lo > 0.0)) throw Error(ErrorKind::Validation, "power-law window must start at t > 0");
  return detail::fit_log(t, y, t_lo, t_hi, [](double x) { return std::log(x); });
}

/// Amplitude of y ~ amplitude * t^rate with the rate held fixed: the
/// geometric mean of y t^{-rate} over the window.
inline FitResult fit_amplitude(std::span<const double> t, std::span<const double> y, double rate,
                               double t_lo, double t_hi) {
  if (!(t_lo > 0.0)) throw Error(ErrorKind::Validation, "power-law window must start at t > 0");
  const FitResult free = fit_power_law(t, y, t_lo, t_hi);
  double acc = 0.0, ss = 0.0, mean_y = 0.0;
  std::vector<double> ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    ly.push_back(std::log(y[i]));
    acc += ly.back() - rate * std::log(t[i]);
    mean_y += ly.back();
  }
  const double n = static_cast<double>(ly.size());
  const double c = acc / n;
  mean_y /= n;
  double syy = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    const double r = ly[k] - c - rate * std::log(t[i]);
    ss += r * r;
    syy += (ly[k] - mean_y) * (ly[k] - mean_y);
    ++k;
  }
  FitResult f = free;
  f.rate = rate;
  f.amplitude = std::exp(c);
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - ss / syy, 0.0, 1.0) : 1.0;
  return f;
}

/// y ~ amplitude * exp(-rate t) on [t_lo, t_hi].
inline FitResult fit_exp_rate(std::span<const double> t, std::span<const double> y, double t_lo,
                              double t_hi) {
  FitResult f = detail::fit_log(t, y, t_lo, t_hi, [](double x) { return x; });
  f.rate = -f.rate;
  return f;
}

/// Default window: the last half decade in log time, [t_end / sqrt(10), t_end].
inline std::pair<double, double> default_window(double t_end) {
  return {t_end / std::sqrt(10.0), t_end};
}

}  // namespace szego
