#pragma once

// Closed-form kernels and direct-quadrature evolution.
//
// The free kernel is the Fresnel propagator
//   G(x,t) = sqrt(m0 / (2 pi i t)) * exp(i m0 x^2 / (2 t)),
// principal square root, so |G| = sqrt(m0 / (2 pi t)) for every x and the
// x = 0 phase is -pi/4.  This is the unique branch under which the direct
// convolution reproduces the momentum-space symbol exp(-i p^2 t / (2 m0)).
// Evaluated with a complex mass argument the same expression analytically
// continues: m0 -> i/(2 k^2) turns G into the classical heat kernel.

#include <complex>
#include <stdexcept>

#include "fuzzy/grid.hpp"

namespace fuzzy {

// Fresnel form with complex mass; the continuation carrier.
template <typename Scalar>
std::complex<Scalar> fresnel_kernel_form(std::complex<Scalar> mass, Scalar x, Scalar t) {
  constexpr Scalar two_pi = Scalar(2) * static_cast<Scalar>(EIGEN_PI);
  const std::complex<Scalar> i(0, 1);
  return std::sqrt(mass / (two_pi * i * t)) * std::exp(i * mass * (x * x) / (Scalar(2) * t));
}

// QM free-particle propagator G(x,t), real positive mass.
template <typename Scalar>
std::complex<Scalar> propagator(Scalar m0, Scalar x, Scalar t) {
  if (!(t > Scalar(0))) throw std::invalid_argument("propagator: t must be positive");
  if (!(m0 > Scalar(0))) throw std::invalid_argument("propagator: m0 must be positive");
  return fresnel_kernel_form(std::complex<Scalar>(m0, 0), x, t);
}

// Extent of the effective support {|g| > 1e-10 max|g|}; the guard scale for
// the oscillatory quadrature below.
template <typename Scalar>
struct SupportBounds {
  Scalar lo, hi;
};

template <typename Scalar>
SupportBounds<Scalar> effective_support(const FuzzyState<Scalar>& state) {
  const RealArray<Scalar> mag = state.samples.abs();
  const Scalar floor = Scalar(1e-10) * mag.maxCoeff();
  Eigen::Index lo = 0, hi = state.grid.size() - 1;
  while (lo < hi && mag(lo) <= floor) ++lo;
  while (hi > lo && mag(hi) <= floor) --hi;
  return {state.grid.position(lo), state.grid.position(hi)};
}

// Path-integral evolution by direct O(n^2) quadrature of
//   g(x',t0+t) = sum_j G(x'-x_j, t) g(x_j) dx.
// Deliberately a different discretization from the spectral engine (line
// convolution, no periodic wrap) so the two can cross-check each other.
// The sampled Fresnel kernel aliases silently when under-resolved: at
// displacements near 2 pi t k/(m0 dx) its phase advances by ~2 pi k per
// sample and ghost images of the state appear there.  The guard requires a
// phase advance of at most pi per sample over the largest displacement the
// quadrature can see (any output point to any support point), which keeps
// the first ghost at twice the grid span.
template <typename Scalar>
FuzzyState<Scalar> evolve_convolution(const FuzzyState<Scalar>& state, Scalar m0, Scalar t) {
  if (!(t > Scalar(0))) throw std::invalid_argument("evolve_convolution: t must be positive");
  if (!(m0 > Scalar(0))) throw std::invalid_argument("evolve_convolution: m0 must be positive");
  require_finite(state.samples, "evolve_convolution");

  const Grid<Scalar>& grid = state.grid;
  const Eigen::Index n = grid.size();
  const SupportBounds<Scalar> support = effective_support(state);
  const Scalar reach = std::max(support.hi - grid.x_min(), grid.position(n - 1) - support.lo);
  const Scalar phase_per_sample = m0 * reach * grid.dx() / t;
  if (phase_per_sample > static_cast<Scalar>(EIGEN_PI))
    throw guard_error("evolve_convolution: oscillation under-resolved (m0*D*dx/t = " +
                      std::to_string(static_cast<double>(phase_per_sample)) +
                      " > pi); refine the grid or increase t");

  // Kernel over all displacement offsets (i - j)*dx, i - j in (-n, n).
  ComplexArray<Scalar> kernel(2 * n - 1);
  for (Eigen::Index d = -(n - 1); d <= n - 1; ++d)
    kernel(d + n - 1) = propagator(m0, static_cast<Scalar>(d) * grid.dx(), t);

  const ComplexArray<Scalar> reversed = state.samples.reverse();
  ComplexArray<Scalar> out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = (kernel.segment(i, n) * reversed).sum() * grid.dx();
  return {grid, std::move(out), state.time + t};
}

// Exact freely evolved Gaussian packet: initial amplitude width sigma0,
// center x0, carrier momentum p0.  With tau = t/(m0 sigma0^2):
//   g(x,t) = (pi sigma0^2)^(-1/4) (1+i tau)^(-1/2)
//            * exp( -(x-xc)^2 / (2 sigma0^2 (1+i tau)) + i p0 (x-x0) - i p0^2 t/(2 m0) ),
// xc = x0 + p0 t / m0.  Density variance sigma0^2 (1+tau^2) / 2.
// Analytic oracle for the evolvers; assumes negligible support at the edges.
template <typename Scalar>
FuzzyState<Scalar> gaussian_free_closed_form(const Grid<Scalar>& grid, Scalar sigma0, Scalar x0, Scalar p0,
                                             Scalar m0, Scalar t) {
  if (!(sigma0 > Scalar(0))) throw std::invalid_argument("gaussian_free_closed_form: sigma0 must be positive");
  if (!(m0 > Scalar(0))) throw std::invalid_argument("gaussian_free_closed_form: m0 must be positive");
  if (!(t >= Scalar(0))) throw std::invalid_argument("gaussian_free_closed_form: t must be nonnegative");
  const std::complex<Scalar> i(0, 1);
  const Scalar tau = t / (m0 * sigma0 * sigma0);
  const std::complex<Scalar> width2 = sigma0 * sigma0 * (Scalar(1) + i * tau);
  const std::complex<Scalar> prefactor =
      std::pow(static_cast<Scalar>(EIGEN_PI) * sigma0 * sigma0, Scalar(-0.25)) /
      std::sqrt(Scalar(1) + i * tau);
  const Scalar xc = x0 + p0 * t / m0;
  ComplexArray<Scalar> g(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const Scalar x = grid.position(j);
    g(j) = prefactor * std::exp(-(x - xc) * (x - xc) / (Scalar(2) * width2) + i * p0 * (x - x0) -
                                i * p0 * p0 * t / (Scalar(2) * m0));
  }
  return {grid, std::move(g), t};
}

// Normalized heat kernel w_D(x,t) = exp(-x^2/(4 k^2 t)) / (2 k sqrt(pi t)).
template <typename Scalar>
Scalar diffusion_kernel(Scalar k, Scalar x, Scalar t) {
  if (!(k > Scalar(0)) || !(t > Scalar(0)))
    throw std::invalid_argument("diffusion_kernel: k and t must be positive");
  return std::exp(-x * x / (Scalar(4) * k * k * t)) /
         (Scalar(2) * k * std::sqrt(static_cast<Scalar>(EIGEN_PI) * t));
}

template <typename Scalar>
Density<Scalar> diffusion_density(const Grid<Scalar>& grid, Scalar k, Scalar t) {
  RealArray<Scalar> w(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) w(j) = diffusion_kernel(k, grid.position(j), t);
  return {grid, std::move(w), t};
}

// Max-abs difference on the grid between the heat kernel and the Fresnel
// form continued to imaginary mass m0 -> i/(2 k^2).  Both sides are exact
// closed forms sampled pointwise; the continuation never goes through the
// unitary evolvers.
template <typename Scalar>
Scalar diffusion_correspondence_residual(Scalar k, Scalar t, const Grid<Scalar>& grid) {
  if (!(k > Scalar(0)) || !(t > Scalar(0)))
    throw std::invalid_argument("diffusion_correspondence_residual: k and t must be positive");
  const std::complex<Scalar> continued_mass(0, Scalar(1) / (2 * k * k));
  Scalar residual = 0;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const Scalar x = grid.position(j);
    const std::complex<Scalar> continued = fresnel_kernel_form(continued_mass, x, t);
    residual = std::max(residual, std::abs(continued - std::complex<Scalar>(diffusion_kernel(k, x, t), 0)));
  }
  return residual;
}

}  // namespace fuzzy
