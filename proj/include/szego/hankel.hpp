#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "szego/dopri.hpp"
#include "szego/mode_vector.hpp"
#include "szego/spectral.hpp"

namespace szego {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

namespace detail {

inline void check_section(const ModeVector& u, std::size_t n) {
  if (n == 0 || 2 * n > u.size())
    throw Error(ErrorKind::Validation, "section size " + std::to_string(n) +
                                           " must lie in [1, N/2] for N = " +
                                           std::to_string(u.size()));
}

inline CVector head(const ModeVector& u, std::size_t n) {
  CVector v(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) v[static_cast<Eigen::Index>(k)] = k < u.size() ? u[k] : cplx{};
  return v;
}

}  // namespace detail

/// Rows 0..n-1 of the Hankel matrix of u (or of S*u when shifted), with every
/// column that can hold a stored coefficient. Entry (j, k) is u(j+k) or u(j+k+1).
inline CMatrix hankel_rows(const ModeVector& u, std::size_t n, bool shifted) {
  detail::check_section(u, n);
  const std::size_t off = shifted ? 1 : 0;
  const std::size_t cols = u.size() - off;
  CMatrix G = CMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; j + k + off < u.size(); ++k)
      G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = u[j + k + off];
  return G;
}

/// Square n x n Hankel section.
inline CMatrix hankel_matrix(const ModeVector& u, std::size_t n, bool shifted) {
  return hankel_rows(u, n, shifted).leftCols(static_cast<Eigen::Index>(n));
}

/// Compression of H_u^2 (or of the shifted square) to the first n modes.
/// H_u is antilinear with symmetric matrix G, so its square acts as G G^*.
inline CMatrix hankel_sq_matrix(const ModeVector& u, std::size_t n, bool shifted) {
  const CMatrix G = hankel_rows(u, n, shifted);
  CMatrix S = G * G.adjoint();
  return (S + S.adjoint()) * 0.5;
}

struct SpectrumOptions {
  double cluster_tol = 1e-7;
  double dom_tol = 1e-6;
  double zero_tol = 1e-10;
  std::size_t n = 0;  // 0 selects N/2
};

struct SpectrumReport {
  std::vector<double> values;
  std::vector<int> mults;
  std::vector<bool> dominant;
  double cluster_tol = 1e-7;

  std::size_t rank() const {
    std::size_t r = 0;
    for (int m : mults) r += static_cast<std::size_t>(m);
    return r;
  }
};

inline void to_json(nlohmann::json& j, const SpectrumReport& r) {
  j = {{"values", r.values}, {"mults", r.mults}, {"dominant", r.dominant},
       {"cluster_tol", r.cluster_tol}};
}

/// Distinct positive eigenvalues of H_u^2 or of the shifted square, largest
/// first, with multiplicities and dominance flags.
inline SpectrumReport spectrum(const ModeVector& u, bool shifted, const SpectrumOptions& opt = {}) {
  SpectrumReport rep;
  rep.cluster_tol = opt.cluster_tol;
  const std::size_t n = opt.n ? opt.n : u.size() / 2;
  const CMatrix A = hankel_sq_matrix(u, n, shifted);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(A);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::Eigensolver, "Hermitian eigensolver did not converge");
  const auto& ev = es.eigenvalues();
  const auto& V = es.eigenvectors();
  const Eigen::Index m = ev.size();
  const double top = m ? ev[m - 1] : 0.0;
  if (!(top > 0.0)) return rep;

  const CVector uh = detail::head(u, n);
  const double unorm = uh.norm();
  double proj_sq = 0.0;
  for (Eigen::Index i = m - 1; i >= 0; --i) {
    const double lam = ev[i];
    if (lam <= opt.zero_tol * top) break;
    const double w = std::norm(V.col(i).dot(uh));
    if (!rep.values.empty() && rep.values.back() - lam <= opt.cluster_tol * rep.values.back()) {
      // Running mean keeps the merged value centred in its cluster.
      const int k = rep.mults.back();
      rep.values.back() = (rep.values.back() * k + lam) / (k + 1);
      rep.mults.back() = k + 1;
      proj_sq += w;
    } else {
      if (!rep.values.empty()) rep.dominant.push_back(std::sqrt(proj_sq) > opt.dom_tol * unorm);
      rep.values.push_back(lam);
      rep.mults.push_back(1);
      proj_sq = w;
    }
  }
  if (!rep.values.empty()) rep.dominant.push_back(std::sqrt(proj_sq) > opt.dom_tol * unorm);
  return rep;
}

/// Alternating sum of the distinct positive eigenvalues of the shifted square.
inline double F_functional(const ModeVector& u, const SpectrumOptions& opt = {}) {
  const auto rep = spectrum(u, true, opt);
  double f = 0.0, sign = 1.0;
  for (double v : rep.values) {
    f += sign * v;
    sign = -sign;
  }
  return f;
}

enum class OmegaVerdict { InOmega, Boundary, Outside };

inline const char* to_string(OmegaVerdict v) {
  switch (v) {
    case OmegaVerdict::InOmega: return "InOmega";
    case OmegaVerdict::Boundary: return "Boundary";
    case OmegaVerdict::Outside: return "Outside";
  }
  return "Unknown";
}

struct OmegaReport {
  OmegaVerdict verdict = OmegaVerdict::Outside;
  double mass = 0.0;
  double F = 0.0;
  bool mean_nonzero = false;  // meaningful on the boundary
};

inline OmegaReport omega_membership(const ModeVector& u, double margin,
                                    const SpectrumOptions& opt = {}) {
  OmegaReport r;
  r.mass = mass(u);
  r.F = F_functional(u, opt);
  r.mean_nonzero = std::abs(mean(u)) > margin;
  if (r.mass < r.F - margin) r.verdict = OmegaVerdict::InOmega;
  else if (std::abs(r.mass - r.F) <= margin) r.verdict = OmegaVerdict::Boundary;
  else r.verdict = OmegaVerdict::Outside;
  return r;
}

/// Toeplitz section of |v|^2: entry (j, k) is the Fourier coefficient of
/// |v|^2 at j - k.
inline CMatrix toeplitz_abs_sq(const ModeVector& v, std::size_t n) {
  std::vector<cplx> c(n);
  for (std::size_t m = 0; m < n; ++m) {
    cplx s{};
    for (std::size_t l = 0; l + m < v.size(); ++l) s += v[l + m] * std::conj(v[l]);
    c[m] = s;
  }
  CMatrix T(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      T(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          j >= k ? c[j - k] : std::conj(c[k - j]);
  return T;
}

struct LaxOperators {
  CMatrix B;  // B_u = -i T_{|u|^2} + (i/2) H_u^2
  CMatrix C;  // C_u = -i T_{|u|^2} + (i/2) H~_u^2
  std::size_t n = 0;
};

inline LaxOperators lax_operators(const ModeVector& u, std::size_t n) {
  const cplx I{0.0, 1.0};
  const CMatrix T = toeplitz_abs_sq(u, n);
  LaxOperators L;
  L.n = n;
  L.B = -I * T + 0.5 * I * hankel_sq_matrix(u, n, false);
  L.C = -I * T + 0.5 * I * hankel_sq_matrix(u, n, true);
  return L;
}

/// Relative mismatch between a central difference of the shifted Hankel
/// matrix and the Lax commutator [C_u - beta B_{S*u}, H~_u] on an n x n
/// section. The generator acts linearly and H~ antilinearly, so the
/// commutator has matrix L G - G conj(L).
inline double lax_residual(const ModeVector& u, const Params& p, std::size_t n, double h) {
  p.validate();
  if (!(h > 0.0)) throw Error(ErrorKind::Validation, "h must be > 0");
  const std::size_t m = u.size() / 2;
  detail::check_section(u, n);

  OdeOptions oo;
  oo.rel_tol = std::min(p.rel_tol, 1e-13);
  oo.abs_tol = std::min(p.abs_tol, 1e-15);
  oo.max_step = h;
  auto f = [&p](double, const ModeVector& v) { return rhs_full(v, p); };
  auto advance = [&](double dt) {
    ModeVector out;
    const double ts[2] = {0.0, dt};
    integrate(f, u, std::span<const double>(ts, 2), oo, [&](double, const ModeVector& v) {
      out = v;
      return true;
    });
    return out;
  };
  const ModeVector up = advance(h), um = advance(-h);

  const auto N = static_cast<Eigen::Index>(n);
  const CMatrix dG =
      (hankel_matrix(up, n, true) - hankel_matrix(um, n, true)) / (2.0 * h);

  const cplx I{0.0, 1.0};
  const CMatrix Hs = hankel_sq_matrix(u, m, true);
  const CMatrix C = -I * toeplitz_abs_sq(u, m) + 0.5 * I * Hs;
  ModeVector v = u;
  v[0] = 0.0;  // S*u shares the Hankel square H~_u^2; only |S*u|^2 = |u - (u|1)|^2 differs
  const CMatrix Bs = -I * toeplitz_abs_sq(v, m) + 0.5 * I * Hs;
  const CMatrix L = C - p.beta * Bs;
  const CMatrix G = hankel_matrix(u, m, true);
  const CMatrix comm = (L * G - G * L.conjugate()).topLeftCorner(N, N);

  const double scale = G.topLeftCorner(N, N).norm();
  const double r = (dG - comm).norm();
  return scale > 0.0 ? r / scale : r;
}

}  // namespace szego
