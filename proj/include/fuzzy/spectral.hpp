#pragma once

// Momentum-space evolution under the generalized free symbol
//   F0(p) = p^s / (2 m0),  s even,
// split-step (Strang) evolution with a position-space potential, spectral
// momentum diagnostics, and the small-t first-order expansion check.
//
// Sign conventions, fixed once by the drift test: forward transform
// phi(p) = int g e^{-ipx} dx, evolution phi -> exp(-i F0(p) t) phi, so a
// positive carrier momentum moves a packet toward +x.  F0 is even in p, so
// the Nyquist mode needs no special casing.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fuzzy/grid.hpp"

namespace fuzzy {

template <typename Scalar = double>
struct EvolutionSpec {
  int s = 2;            // even positive exponent of the free symbol
  Scalar m0 = 1;        // mass, positive
  Scalar t_final = 0;   // total evolution time
  Scalar dt = 0;        // step size, required with a potential
  std::optional<RealArray<Scalar>> potential;  // V(x) on the grid
};

template <typename Scalar>
void check_exponent(int s) {
  if (s < 2 || s % 2 != 0)
    throw std::invalid_argument("spectral evolution: exponent s must be a positive even integer");
}

// Precomputed F0(p_k) table on a grid's dual lattice.
template <typename Scalar = double>
class SpectralPlan {
 public:
  SpectralPlan(const Grid<Scalar>& grid, int s, Scalar m0) : grid_(grid), s_(s), m0_(m0) {
    check_exponent<Scalar>(s);
    if (!(m0 > Scalar(0))) throw std::invalid_argument("SpectralPlan: m0 must be positive");
    symbol_ = grid.momenta().pow(s) / (2 * m0);
  }

  const Grid<Scalar>& grid() const { return grid_; }
  int exponent() const { return s_; }
  Scalar mass() const { return m0_; }
  const RealArray<Scalar>& free_symbol() const { return symbol_; }

  // exp(-i F0(p_k) t); unit modulus for every k.
  ComplexArray<Scalar> phases(Scalar t) const {
    const std::complex<Scalar> i(0, 1);
    return (-i * (symbol_ * t).template cast<std::complex<Scalar>>()).exp();
  }

  FuzzyState<Scalar> apply(const FuzzyState<Scalar>& state, Scalar t) const {
    if (!(state.grid == grid_)) throw std::invalid_argument("SpectralPlan: grid mismatch");
    ComplexArray<Scalar> phi = fft_forward(state.samples);
    phi *= phases(t);
    return {grid_, fft_inverse(phi), state.time + t};
  }

 private:
  Grid<Scalar> grid_;
  int s_;
  Scalar m0_;
  RealArray<Scalar> symbol_;
};

template <typename Scalar>
FuzzyState<Scalar> evolve_spectral(const FuzzyState<Scalar>& state, int s, Scalar m0, Scalar t) {
  if (!(t >= Scalar(0))) throw std::invalid_argument("evolve_spectral: t must be nonnegative");
  return SpectralPlan<Scalar>(state.grid, s, m0).apply(state, t);
}

// Reversal with the conjugate symbol exp(+i F0 t); undoes evolve_spectral.
template <typename Scalar>
FuzzyState<Scalar> evolve_spectral_reversed(const FuzzyState<Scalar>& state, int s, Scalar m0, Scalar t) {
  if (!(t >= Scalar(0))) throw std::invalid_argument("evolve_spectral_reversed: t must be nonnegative");
  return SpectralPlan<Scalar>(state.grid, s, m0).apply(state, -t);
}

// Strang splitting exp(-i V dt/2) exp(-i H0 dt) exp(-i V dt/2), iterated
// t_final/dt times; norm preserved to round-off, global error O(dt^2).
template <typename Scalar>
FuzzyState<Scalar> evolve_split_step(const FuzzyState<Scalar>& state, const EvolutionSpec<Scalar>& spec) {
  if (!spec.potential) throw std::invalid_argument("evolve_split_step: potential required");
  if (!(spec.dt > Scalar(0))) throw std::invalid_argument("evolve_split_step: dt must be positive");
  if (!(spec.t_final >= Scalar(0))) throw std::invalid_argument("evolve_split_step: t_final must be nonnegative");
  const RealArray<Scalar>& potential = *spec.potential;
  if (potential.size() != state.grid.size())
    throw std::invalid_argument("evolve_split_step: potential size does not match grid");
  if (!potential.isFinite().all())
    throw std::invalid_argument("evolve_split_step: non-finite potential samples");

  const Scalar steps_exact = spec.t_final / spec.dt;
  const auto steps = static_cast<std::int64_t>(std::llround(steps_exact));
  if (std::abs(steps_exact - static_cast<Scalar>(steps)) > Scalar(1e-9) * std::max<Scalar>(1, steps_exact))
    throw std::invalid_argument("evolve_split_step: dt must divide t_final");

  const SpectralPlan<Scalar> plan(state.grid, spec.s, spec.m0);
  const ComplexArray<Scalar> kinetic = plan.phases(spec.dt);
  const std::complex<Scalar> i(0, 1);
  const ComplexArray<Scalar> half_kick =
      (-i * (potential * (spec.dt / 2)).template cast<std::complex<Scalar>>()).exp();

  ComplexArray<Scalar> g = state.samples;
  for (std::int64_t step = 0; step < steps; ++step) {
    g *= half_kick;
    ComplexArray<Scalar> phi = fft_forward(g);
    phi *= kinetic;
    g = fft_inverse(phi);
    g *= half_kick;
  }
  return {state.grid, std::move(g), state.time + static_cast<Scalar>(steps) * spec.dt};
}

// Spectral application of the momentum operator (symbol p, consistent with
// the evolution sign convention).
template <typename Scalar>
FuzzyState<Scalar> momentum_operator_apply(const FuzzyState<Scalar>& state) {
  require_finite(state.samples, "momentum_operator_apply");
  ComplexArray<Scalar> phi = fft_forward(state.samples);
  phi *= state.grid.momenta().template cast<std::complex<Scalar>>();
  return {state.grid, fft_inverse(phi), state.time};
}

// <p> = <g|p|g> / <g|g> via Parseval.
template <typename Scalar>
Scalar momentum_expectation(const FuzzyState<Scalar>& state) {
  const ComplexArray<Scalar> phi = fft_forward(state.samples);
  const RealArray<Scalar> weight = phi.abs2();
  return (state.grid.momenta() * weight).sum() / weight.sum();
}

template <typename Scalar = double>
struct FirstOrderCheck {
  std::vector<std::pair<Scalar, Scalar>> residuals;  // (t, max residual over the window)
  Scalar slope = 0;                                  // log-log slope over the positive-t entries
};

// Residual of the first-order expansion exp(-i F0 p t) ~ 1 - i F0(p) t,
// maximized over the dual-lattice momenta with |p| <= p_window, for each t.
// The remainder is O(t^2); the fitted log-log slope certifies it.
template <typename Scalar>
FirstOrderCheck<Scalar> first_order_check(const Grid<Scalar>& grid, Scalar p_window, int s, Scalar m0,
                                          const std::vector<Scalar>& t_list) {
  check_exponent<Scalar>(s);
  if (!(m0 > Scalar(0))) throw std::invalid_argument("first_order_check: m0 must be positive");
  if (!(p_window > Scalar(0)) || p_window > grid.momentum_max())
    throw std::invalid_argument("first_order_check: p_window outside the dual lattice");
  std::vector<Scalar> f0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Scalar p = grid.momentum(k);
    if (std::abs(p) <= p_window) f0.push_back(std::pow(p, s) / (2 * m0));
  }
  Scalar f0_max = 0;
  for (Scalar f : f0) f0_max = std::max(f0_max, std::abs(f));
  for (Scalar t : t_list) {
    if (!(t >= Scalar(0))) throw std::invalid_argument("first_order_check: negative t");
    if (f0_max * t > Scalar(0.1) * (1 + Scalar(1e-12)))
      throw std::invalid_argument("first_order_check: F0(p_window)*t exceeds the expansion regime (0.1)");
  }

  FirstOrderCheck<Scalar> result;
  const std::complex<Scalar> i(0, 1);
  for (Scalar t : t_list) {
    Scalar r = 0;
    for (Scalar f : f0)
      r = std::max(r, std::abs(std::exp(-i * f * t) - (std::complex<Scalar>(1, 0) - i * f * t)));
    result.residuals.emplace_back(t, r);
  }

  // Least-squares slope of log r vs log t over entries with t, r > 0.
  Scalar sx = 0, sy = 0, sxx = 0, sxy = 0;
  Eigen::Index m = 0;
  for (const auto& [t, r] : result.residuals) {
    if (t <= Scalar(0) || r <= Scalar(0)) continue;
    const Scalar lx = std::log(t), ly = std::log(r);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2) result.slope = (static_cast<Scalar>(m) * sxy - sx * sy) / (static_cast<Scalar>(m) * sxx - sx * sx);
  return result;
}

}  // namespace fuzzy
