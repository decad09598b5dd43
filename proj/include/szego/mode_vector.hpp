#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "szego/error.hpp"

namespace szego {

using cplx = std::complex<double>;

/// Truncated Fourier representation of a function in L^2_+ of the circle.
/// Entry k holds the coefficient of e^{ikx}; negative frequencies are never
/// stored.
class ModeVector {
 public:
  ModeVector() = default;
  explicit ModeVector(std::size_t n) : c_(n, cplx{0.0, 0.0}) {}
  explicit ModeVector(std::vector<cplx> coeffs) : c_(std::move(coeffs)) {}
  ModeVector(std::initializer_list<cplx> coeffs) : c_(coeffs) {}

  std::size_t size() const noexcept { return c_.size(); }
  bool empty() const noexcept { return c_.empty(); }

  cplx operator[](std::size_t k) const { return c_[k]; }
  cplx& operator[](std::size_t k) { return c_[k]; }

  std::span<const cplx> coeffs() const noexcept { return c_; }
  std::span<cplx> coeffs() noexcept { return c_; }
  const std::vector<cplx>& vec() const noexcept { return c_; }

  /// Copy truncated or zero-padded to `n` modes.
  ModeVector resized(std::size_t n) const {
    std::vector<cplx> out(n, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < std::min(n, c_.size()); ++k) out[k] = c_[k];
    return ModeVector(std::move(out));
  }

  ModeVector& operator+=(const ModeVector& o) {
    check_same(o);
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  ModeVector& operator-=(const ModeVector& o) {
    check_same(o);
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  ModeVector& operator*=(cplx s) {
    for (auto& x : c_) x *= s;
    return *this;
  }

  friend ModeVector operator+(ModeVector a, const ModeVector& b) { return a += b; }
  friend ModeVector operator-(ModeVector a, const ModeVector& b) { return a -= b; }
  friend ModeVector operator*(cplx s, ModeVector a) { return a *= s; }
  friend ModeVector operator*(ModeVector a, cplx s) { return a *= s; }
  friend bool operator==(const ModeVector&, const ModeVector&) = default;

  bool all_finite() const {
    for (const auto& x : c_)
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    return true;
  }

 private:
  void check_same(const ModeVector& o) const {
    if (o.size() != size())
      throw Error(ErrorKind::Validation, "mode count mismatch: " + std::to_string(size()) +
                                             " vs " + std::to_string(o.size()));
  }

  std::vector<cplx> c_;
};

/// Equation parameters and integrator tolerances.
struct Params {
  double nu = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t N = 256;
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;

  void validate() const {
    if (!(nu > 0.0)) throw Error(ErrorKind::Validation, "nu must be > 0");
    if (N < 8) throw Error(ErrorKind::Validation, "N must be >= 8");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
      throw Error(ErrorKind::Validation, "tolerances must be positive");
    if (!std::isfinite(alpha) || !std::isfinite(beta))
      throw Error(ErrorKind::Validation, "alpha and beta must be finite");
  }
};

/// (u|1), the zero mode.
inline cplx mean(const ModeVector& u) { return u.empty() ? cplx{} : u[0]; }

inline double mass(const ModeVector& u) {
  double s = 0.0;
  for (const auto& x : u.coeffs()) s += std::norm(x);
  return s;
}

/// Sum of k |u_k|^2.
inline double momentum(const ModeVector& u) {
  double s = 0.0;
  for (std::size_t k = 1; k < u.size(); ++k) s += static_cast<double>(k) * std::norm(u[k]);
  return s;
}

/// Squared H^s norm with weight (1 + k^2)^s.
inline double sobolev_sq(const ModeVector& u, double s) {
  double acc = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double kk = static_cast<double>(k);
    acc += std::pow(1.0 + kk * kk, s) * std::norm(u[k]);
  }
  return acc;
}

/// Share of the (1+k)-weighted energy sitting in the upper half of the modes.
inline double tail_fraction(const ModeVector& u) {
  double total = 0.0, tail = 0.0;
  const std::size_t half = u.size() / 2;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double w = (1.0 + static_cast<double>(k)) * std::norm(u[k]);
    total += w;
    if (k >= half) tail += w;
  }
  return total > 0.0 ? tail / total : 0.0;
}

inline double sup_distance(const ModeVector& a, const ModeVector& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double d = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const cplx x = k < a.size() ? a[k] : cplx{};
    const cplx y = k < b.size() ? b[k] : cplx{};
    d = std::max(d, std::abs(x - y));
  }
  return d;
}

inline double l2_distance(const ModeVector& a, const ModeVector& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double d = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const cplx x = k < a.size() ? a[k] : cplx{};
    const cplx y = k < b.size() ? b[k] : cplx{};
    d += std::norm(x - y);
  }
  return std::sqrt(d);
}

// JSON: an array of [re, im] pairs indexed by frequency.

inline void to_json(nlohmann::json& j, const ModeVector& u) {
  j = nlohmann::json::array();
  for (const auto& x : u.coeffs()) j.push_back({x.real(), x.imag()});
}

inline void from_json(const nlohmann::json& j, ModeVector& u) {
  if (!j.is_array()) throw Error(ErrorKind::Validation, "mode vector must be a JSON array");
  std::vector<cplx> c;
  c.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw Error(ErrorKind::Validation, "mode vector entries must be [re, im] pairs");
    c.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  u = ModeVector(std::move(c));
}

inline void to_json(nlohmann::json& j, const Params& p) {
  j = {{"nu", p.nu},           {"alpha", p.alpha},     {"beta", p.beta},
       {"N", p.N},             {"rel_tol", p.rel_tol}, {"abs_tol", p.abs_tol}};
}

}  // namespace szego
