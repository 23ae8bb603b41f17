#pragma once

// Multi-point source specifications and the regularized initial states built
// from them.  Point sources are always Gaussian-regularized with width
// sigma_reg, so every state is square-integrable and every diagnostic finite:
//   g0(x) = C * sum_i sqrt(w0_i) exp(-(x-x_i)^2 / (2 sigma^2)) exp(i alpha_i)
// with C fixed by N2 = 1.  Displacements are wrapped on the periodic ring, so
// shifting every source by one dx shifts the samples by exactly one index.

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzy/grid.hpp"

namespace fuzzy {

template <typename Scalar = double>
struct SourcePoint {
  Scalar x = 0;       // position, strictly inside the grid
  Scalar weight = 0;  // w0_i >= 0, sum over sources = 1
  Scalar phase = 0;   // alpha_i in radians
};

template <typename Scalar = double>
struct SourceSpec {
  std::vector<SourcePoint<Scalar>> points;
  Scalar sigma_reg = 0;  // regularization width, >= 2*dx of the target grid
};

// Probabilistic ensemble of source specs (a mixed, not superposed, state).
template <typename Scalar = double>
struct EnsembleSpec {
  struct Member {
    Scalar probability = 0;
    SourceSpec<Scalar> sources;
  };
  std::vector<Member> members;
};

inline constexpr double source_weight_sum_tolerance = 1e-12;

template <typename Scalar>
void validate(const SourceSpec<Scalar>& spec, const Grid<Scalar>& grid) {
  if (spec.points.empty()) throw std::invalid_argument("SourceSpec: no sources");
  Scalar weight_sum = 0;
  for (const auto& pt : spec.points) {
    if (!std::isfinite(pt.x) || !std::isfinite(pt.weight) || !std::isfinite(pt.phase))
      throw std::invalid_argument("SourceSpec: non-finite source entry");
    if (pt.weight < Scalar(0)) throw std::invalid_argument("SourceSpec: negative weight");
    if (!(pt.x > grid.x_min() && pt.x < grid.x_max()))
      throw std::invalid_argument("SourceSpec: source at x=" + std::to_string(static_cast<double>(pt.x)) +
                                  " lies outside the grid interior");
    weight_sum += pt.weight;
  }
  if (std::abs(weight_sum - Scalar(1)) > Scalar(source_weight_sum_tolerance))
    throw std::invalid_argument("SourceSpec: weights sum to " + std::to_string(static_cast<double>(weight_sum)) +
                                ", expected 1 within 1e-12");
  if (!(spec.sigma_reg >= 2 * grid.dx()))
    throw std::invalid_argument("SourceSpec: sigma_reg must be >= 2*dx for resolvability");
}

template <typename Scalar>
void validate(const EnsembleSpec<Scalar>& ensemble, const Grid<Scalar>& grid) {
  if (ensemble.members.empty()) throw std::invalid_argument("EnsembleSpec: no members");
  Scalar prob_sum = 0;
  for (const auto& m : ensemble.members) {
    if (m.probability < Scalar(0)) throw std::invalid_argument("EnsembleSpec: negative probability");
    prob_sum += m.probability;
    validate(m.sources, grid);
  }
  if (std::abs(prob_sum - Scalar(1)) > Scalar(source_weight_sum_tolerance))
    throw std::invalid_argument("EnsembleSpec: probabilities sum to " +
                                std::to_string(static_cast<double>(prob_sum)) + ", expected 1");
}

// Normalized (N2 = 1) regularized multi-point source state at t = 0.
template <typename Scalar>
FuzzyState<Scalar> build_source_state(const Grid<Scalar>& grid, const SourceSpec<Scalar>& spec) {
  validate(spec, grid);
  ComplexArray<Scalar> g = ComplexArray<Scalar>::Zero(grid.size());
  const Scalar two_sigma2 = 2 * spec.sigma_reg * spec.sigma_reg;
  for (const auto& pt : spec.points) {
    const std::complex<Scalar> amp = std::sqrt(pt.weight) * std::exp(std::complex<Scalar>(0, pt.phase));
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      const Scalar d = grid.wrap(grid.position(j) - pt.x);
      g(j) += amp * std::exp(-d * d / two_sigma2);
    }
  }
  return normalize(FuzzyState<Scalar>{grid, std::move(g), Scalar(0)});
}

// A pure multi-source state together with its single-source members under the
// shared global normalization, so that the member densities decompose the
// pure density exactly: w_s = sum_i w_i + cross terms.
template <typename Scalar = double>
struct SourceComponents {
  FuzzyState<Scalar> pure;
  std::vector<FuzzyState<Scalar>> members;
};

template <typename Scalar>
SourceComponents<Scalar> build_source_components(const Grid<Scalar>& grid, const SourceSpec<Scalar>& spec) {
  validate(spec, grid);
  const Scalar two_sigma2 = 2 * spec.sigma_reg * spec.sigma_reg;
  std::vector<FuzzyState<Scalar>> members;
  ComplexArray<Scalar> sum = ComplexArray<Scalar>::Zero(grid.size());
  for (const auto& pt : spec.points) {
    const std::complex<Scalar> amp = std::sqrt(pt.weight) * std::exp(std::complex<Scalar>(0, pt.phase));
    ComplexArray<Scalar> field(grid.size());
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      const Scalar d = grid.wrap(grid.position(j) - pt.x);
      field(j) = amp * std::exp(-d * d / two_sigma2);
    }
    sum += field;
    members.push_back({grid, std::move(field), Scalar(0)});
  }
  const Scalar n2 = integrate(grid, sum.abs2());
  if (!(n2 > Scalar(0))) throw std::invalid_argument("build_source_components: zero-norm superposition");
  const Scalar scale = Scalar(1) / std::sqrt(n2);
  for (auto& member : members) member.samples *= scale;
  return {FuzzyState<Scalar>{grid, scale * sum, Scalar(0)}, std::move(members)};
}

// Unit-mass (integral 1, not N2 = 1) regularized delta profile; the natural
// object for delta-sequence functionals, since the p = 0 Fourier component
// -- and hence the integral -- is conserved by every free evolution.
template <typename Scalar>
FuzzyState<Scalar> build_unit_mass_source(const Grid<Scalar>& grid, Scalar x0, Scalar sigma_reg) {
  if (!(x0 > grid.x_min() && x0 < grid.x_max()))
    throw std::invalid_argument("build_unit_mass_source: x0 outside the grid interior");
  if (!(sigma_reg >= 2 * grid.dx()))
    throw std::invalid_argument("build_unit_mass_source: sigma_reg must be >= 2*dx");
  ComplexArray<Scalar> g(grid.size());
  const Scalar two_sigma2 = 2 * sigma_reg * sigma_reg;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const Scalar d = grid.wrap(grid.position(j) - x0);
    g(j) = std::exp(-d * d / two_sigma2);
  }
  const std::complex<Scalar> mass = integrate(grid, g);
  return {grid, g / mass.real(), Scalar(0)};
}

}  // namespace fuzzy
