#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "szego/mode_vector.hpp"

namespace szego {

namespace detail {

// FFTW planning is not thread safe, execution on new arrays is. Plans are
// built once per length under a lock and then shared.
class FftPlans {
 public:
  struct Pair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
  };

  static FftPlans& instance() {
    static FftPlans plans;
    return plans;
  }

  Pair get(std::size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> a(n), b(n);
    auto* in = reinterpret_cast<fftw_complex*>(a.data());
    auto* out = reinterpret_cast<fftw_complex*>(b.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    Pair p;
    p.forward = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, flags);
    p.backward = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_BACKWARD, flags);
    plans_.emplace(n, p);
    return p;
  }

  ~FftPlans() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

 private:
  FftPlans() = default;
  std::mutex mu_;
  std::map<std::size_t, Pair> plans_;
};

inline void execute(fftw_plan plan, std::vector<cplx>& in, std::vector<cplx>& out) {
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace detail

/// Values u(2 pi j / L), j = 0..L-1, for L >= u.size().
inline std::vector<cplx> grid_values(const ModeVector& u, std::size_t L) {
  std::vector<cplx> in(L, cplx{}), out(L);
  for (std::size_t k = 0; k < u.size() && k < L; ++k) in[k] = u[k];
  detail::execute(detail::FftPlans::instance().get(L).backward, in, out);
  return out;
}

/// Fourier coefficients of Pi(|u|^2 u), truncated to u.size() modes.
/// The product is formed on a grid of 2N points, which is alias free for the
/// retained modes.
inline ModeVector cubic_term(const ModeVector& u) {
  const std::size_t n = u.size();
  if (n == 0) return u;
  const std::size_t L = 2 * n;
  const auto plans = detail::FftPlans::instance().get(L);
  std::vector<cplx> buf(L, cplx{}), grid(L);
  for (std::size_t k = 0; k < n; ++k) buf[k] = u[k];
  detail::execute(plans.backward, buf, grid);
  for (auto& g : grid) g *= std::norm(g);
  detail::execute(plans.forward, grid, buf);
  ModeVector out(n);
  const double scale = 1.0 / static_cast<double>(L);
  for (std::size_t k = 0; k < n; ++k) out[k] = buf[k] * scale;
  return out;
}

/// S* u = e^{-ix}(u - (u|1)).
inline ModeVector shift_down(const ModeVector& u) {
  ModeVector out(u.size());
  for (std::size_t k = 0; k + 1 < u.size(); ++k) out[k] = u[k + 1];
  return out;
}

/// S u = e^{ix} u, truncated to the same mode count.
inline ModeVector shift_up(const ModeVector& u) {
  ModeVector out(u.size());
  for (std::size_t k = 1; k < u.size(); ++k) out[k] = u[k - 1];
  return out;
}

/// S Pi(|S* u|^2 S* u), without the beta factor.
inline ModeVector beta_term(const ModeVector& u) { return shift_up(cubic_term(shift_down(u))); }

/// du/dt for the damped (alpha, beta) equation on the truncated mode space.
inline ModeVector rhs_full(const ModeVector& u, const Params& p) {
  const cplx I{0.0, 1.0};
  ModeVector cubic = cubic_term(u);
  const ModeVector shifted = beta_term(u);
  const cplx m = mean(u);
  for (std::size_t k = 0; k < u.size(); ++k) cubic[k] = -I * (cubic[k] - p.beta * shifted[k]);
  if (!u.empty()) cubic[0] += -I * p.alpha * m - p.nu * m;
  return cubic;
}

}  // namespace szego
