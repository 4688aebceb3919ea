#pragma once

// Closed-form Jaynes-Cummings results in the rotating-wave approximation:
// 2x2 block amplitudes, mean absorbed photon number, Poisson-averaged
// transition probabilities and the cavity population recursion.
//
// Scalar arithmetic only. Nothing here touches the matrix code, so these
// functions serve as an independent oracle for it.

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "qtherm/error.hpp"
#include "qtherm/params.hpp"

namespace qtherm::analytic {

using cplx = std::complex<double>;

/// Amplitudes of the {|n-1, e>, |n, g>} block started from |n-1, e>:
/// a_n stays, b_n has emitted into the cavity.
struct JcmAmplitudes {
  int n = 0;
  double omega_n = 0.0;        // 2 gamma sqrt(n)
  double omega_n_prime = 0.0;  // sqrt(omega_n^2 + delta_c^2)
  double delta_c = 0.0;        // omega_b - omega_a
  cplx a_n{1.0, 0.0};
  cplx b_n{0.0, 0.0};
};

namespace detail {
// sin(x)/x, accurate near 0
inline double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}
}  // namespace detail

inline JcmAmplitudes amplitudes(int n, double t, const JcmParams& p) {
  if (n < 0) throw PreconditionError("amplitudes: n must be >= 0");
  if (t < 0.0) throw PreconditionError("amplitudes: t must be >= 0");
  JcmAmplitudes out;
  out.n = n;
  out.delta_c = p.detuning();
  if (n == 0) return out;  // b_0 = 0
  out.omega_n = 2.0 * p.gamma * std::sqrt(static_cast<double>(n));
  out.omega_n_prime = std::hypot(out.omega_n, out.delta_c);
  const double half = 0.5 * out.omega_n_prime * t;
  // sin(W't/2)/W' written via sinc so W' = 0 is regular
  const double s_over = 0.5 * t * detail::sinc(half);
  out.a_n = cplx(std::cos(half), -out.delta_c * s_over);
  out.b_n = cplx(0.0, -out.omega_n * s_over);
  return out;
}

inline double b2(int n, double t, const JcmParams& p) { return std::norm(amplitudes(n, t, p).b_n); }

/// Cavity Fock populations with the atom's level populations.
struct AtomFieldState {
  std::vector<double> p_n;
  double sigma_e = 0.0;
  double sigma_g = 1.0;
  double x = 0.0;  // mean photons absorbed by the atom so far

  double mean_n() const {
    double m = 0.0;
    for (std::size_t k = 0; k < p_n.size(); ++k) m += static_cast<double>(k) * p_n[k];
    return m;
  }

  void validate() const {
    constexpr double tol = 1e-12;
    double s = 0.0;
    for (double v : p_n) {
      if (v < -tol || v > 1.0 + tol) throw PreconditionError("AtomFieldState: p_n out of [0,1]");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-10) throw PreconditionError("AtomFieldState: sum p_n != 1");
    if (sigma_e < -tol || sigma_g < -tol || std::abs(sigma_e + sigma_g - 1.0) > 1e-10) {
      throw PreconditionError("AtomFieldState: invalid atomic populations");
    }
  }
};

/// x(t) = sum_n p_n (sigma_g |b_n|^2 - sigma_e |b_{n+1}|^2).
inline double x_of_t(const AtomFieldState& s, double t, const JcmParams& p) {
  s.validate();
  double x = 0.0;
  for (std::size_t n = 0; n < s.p_n.size(); ++n) {
    const int k = static_cast<int>(n);
    x += s.p_n[n] * (s.sigma_g * b2(k, t, p) - s.sigma_e * b2(k + 1, t, p));
  }
  return x;
}

/// Atomic populations and energy changes after the atom absorbs x photons.
struct AbsorptionUpdate {
  double sigma_e = 0.0;
  double sigma_g = 0.0;
  double dH_a = 0.0;
  double dH_b = 0.0;
};

inline AbsorptionUpdate absorb(const AtomFieldState& s, double x, const JcmParams& p) {
  return {s.sigma_e + x, s.sigma_g - x, -p.omega_a * x, p.omega_b * x};
}

/// lambda * integral exp(-lambda t) |b_n(t)|^2 dt over t >= 0.
inline double mean_b2_poisson(int n, double lambda, const JcmParams& p) {
  if (n < 0) throw PreconditionError("mean_b2_poisson: n must be >= 0");
  if (!(lambda > 0.0)) throw PreconditionError("mean_b2_poisson: lambda must be > 0");
  if (n == 0) return 0.0;
  const double d = p.detuning();
  const double w2 = 4.0 * static_cast<double>(n) * p.gamma * p.gamma;
  return 0.5 * w2 / (lambda * lambda + d * d + w2);
}

/// Poisson-averaged |b_n|^2 for n = 0..n_max.
inline std::vector<double> poisson_b2_table(int n_max, double lambda, const JcmParams& p) {
  std::vector<double> t(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) t[static_cast<std::size_t>(n)] = mean_b2_poisson(n, lambda, p);
  return t;
}

/// Mean absorption rate lambda <x> in the weak-coupling limit.
inline double einstein_rate(const AtomFieldState& s, double lambda, const JcmParams& p) {
  s.validate();
  if (!(lambda > 0.0)) throw PreconditionError("einstein_rate: lambda must be > 0");
  const double d = p.detuning();
  const double n = s.mean_n();
  return 2.0 * lambda * p.gamma * p.gamma / (lambda * lambda + d * d) *
         (s.sigma_g * n - s.sigma_e * (n + 1.0));
}

/// One measurement-averaged update of the cavity populations. The flow out
/// of the top level is dropped (reflecting boundary) and p_{-1} = 0.
inline AtomFieldState pn_master_step(const AtomFieldState& s, std::span<const double> b2_per_n) {
  s.validate();
  const std::size_t len = s.p_n.size();
  if (b2_per_n.size() < len) throw PreconditionError("pn_master_step: b2 table too short");
  if (len > 0 && b2_per_n[0] != 0.0) throw PreconditionError("pn_master_step: b_0 must vanish");
  // flow[n]: net downward flow from level n into n-1
  std::vector<double> flow(len + 1, 0.0);
  for (std::size_t n = 1; n < len; ++n) {
    flow[n] = b2_per_n[n] * (s.sigma_g * s.p_n[n] - s.sigma_e * s.p_n[n - 1]);
  }
  AtomFieldState out = s;
  for (std::size_t n = 0; n < len; ++n) {
    const double v = s.p_n[n] + flow[n + 1] - flow[n];
    if (v < -1e-14) throw StepSizeError("pn_master_step: negative probability");
    out.p_n[n] = v;
  }
  return out;
}

/// Fixed point of pn_master_step: p_n proportional to (sigma_e/sigma_g)^n.
inline std::vector<double> steady_pn(double sigma_e, double sigma_g, int n_max) {
  if (!(sigma_g > 0.0)) throw PreconditionError("steady_pn: sigma_g must be > 0");
  const double r = sigma_e / sigma_g;
  std::vector<double> p(static_cast<std::size_t>(n_max) + 1);
  double w = 1.0, z = 0.0;
  for (auto& v : p) {
    v = w;
    z += w;
    w *= r;
  }
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace qtherm::analytic
