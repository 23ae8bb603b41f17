#pragma once

// Densities, the pure/mixed interference decomposition, overlap measures,
// fringe and tail diagnostics, delta-sequence functionals, moments, and
// position sampling from a discretized density.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "fuzzy/grid.hpp"
#include "fuzzy/kernels.hpp"
#include "fuzzy/source.hpp"
#include "fuzzy/spectral.hpp"

namespace fuzzy {

template <typename Scalar>
Density<Scalar> density(const FuzzyState<Scalar>& state) {
  return {state.grid, state.samples.abs2(), state.time};
}

namespace detail {

template <typename Scalar>
FuzzyState<Scalar> evolve_by_spec(const FuzzyState<Scalar>& state, const EvolutionSpec<Scalar>& spec) {
  if (spec.potential) return evolve_split_step(state, spec);
  return evolve_spectral(state, spec.s, spec.m0, spec.t_final);
}

}  // namespace detail

// Density of a probabilistic ensemble: each member evolves independently and
// the member densities add with their probabilities (no interference term).
template <typename Scalar>
Density<Scalar> mixed_density(const Grid<Scalar>& grid, const EnsembleSpec<Scalar>& ensemble,
                              const EvolutionSpec<Scalar>& evolution) {
  validate(ensemble, grid);
  RealArray<Scalar> w = RealArray<Scalar>::Zero(grid.size());
  Scalar time = 0;
  for (const auto& member : ensemble.members) {
    const FuzzyState<Scalar> evolved = detail::evolve_by_spec(build_source_state(grid, member.sources), evolution);
    w += member.probability * evolved.samples.abs2();
    time = evolved.time;
  }
  return {grid, std::move(w), time};
}

// w_s = sum_i w_i + l_g * w_n, with the nonlinear term w_n defined
// operationally as w_s minus the independently evolved member densities.
template <typename Scalar = double>
struct DecompositionResult {
  Density<Scalar> w_s;       // pure-state density
  Density<Scalar> w_m;       // additive mixed sum of the member densities
  SignedField<Scalar> w_n;   // oscillating nonlinear term, integrates to ~0
  int l_g = 1;               // 1 pure / 0 mixed
  Scalar w_n_integral = 0;
  Scalar w_n_min = 0;
  Scalar projection_coeff = 0;  // relative L2 content of w_n inside span{w_i}
  Scalar bound_excess = 0;      // max over x of |w_n| - 2 sum_{i<j} sqrt(w_i w_j)
};

// Decomposes an evolved pure state against its separately evolved members.
// Member weights are implicit in the member norms: each member must carry the
// same global normalization as the pure state, so that w_n is exactly the
// cross term.
template <typename Scalar>
DecompositionResult<Scalar> decompose(const FuzzyState<Scalar>& pure_evolved,
                                      const std::vector<FuzzyState<Scalar>>& members_evolved) {
  if (members_evolved.empty()) throw std::invalid_argument("decompose: no member states");
  for (const auto& member : members_evolved) {
    if (!(member.grid == pure_evolved.grid)) throw std::invalid_argument("decompose: grid mismatch");
    if (std::abs(member.time - pure_evolved.time) >
        Scalar(1e-12) * std::max<Scalar>(1, std::abs(pure_evolved.time)))
      throw std::invalid_argument("decompose: timestamp mismatch");
  }
  const Grid<Scalar>& grid = pure_evolved.grid;
  const Eigen::Index n = grid.size();
  const auto n_members = static_cast<Eigen::Index>(members_evolved.size());

  std::vector<RealArray<Scalar>> w(members_evolved.size());
  RealArray<Scalar> w_m = RealArray<Scalar>::Zero(n);
  for (std::size_t i = 0; i < members_evolved.size(); ++i) {
    w[i] = members_evolved[i].samples.abs2();
    w_m += w[i];
  }
  const RealArray<Scalar> w_s = pure_evolved.samples.abs2();
  const RealArray<Scalar> w_n = w_s - w_m;

  RealArray<Scalar> cross_bound = RealArray<Scalar>::Zero(n);
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = i + 1; j < w.size(); ++j) cross_bound += 2 * (w[i] * w[j]).sqrt();

  DecompositionResult<Scalar> result{
      {grid, w_s, pure_evolved.time}, {grid, w_m, pure_evolved.time}, {grid, w_n, pure_evolved.time}, 1,
      integrate(grid, w_n),           w_n.minCoeff(),                 Scalar(0),
      (w_n.abs() - cross_bound).maxCoeff()};

  // Least-squares projection of w_n onto span{w_i}; a genuine interference
  // term carries no linear member content.
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> basis(n, n_members);
  for (Eigen::Index i = 0; i < n_members; ++i) basis.col(i) = w[static_cast<std::size_t>(i)].matrix();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coeff =
      basis.colPivHouseholderQr().solve(w_n.matrix());
  const Scalar w_n_norm = w_n.matrix().norm();
  if (w_n_norm > Scalar(0)) result.projection_coeff = (basis * coeff).norm() / w_n_norm;
  return result;
}

inline constexpr double density_norm_tolerance = 1e-6;

// Bhattacharyya-type overlap R_w = int sqrt(w1 w2) dx, in [0, 1] for
// normalized densities.
template <typename Scalar>
Scalar overlap_measure(const Density<Scalar>& w1, const Density<Scalar>& w2) {
  if (!(w1.grid == w2.grid)) throw std::invalid_argument("overlap_measure: grid mismatch");
  if (std::abs(norm(w1) - Scalar(1)) > Scalar(density_norm_tolerance) ||
      std::abs(norm(w2) - Scalar(1)) > Scalar(density_norm_tolerance))
    throw std::invalid_argument("overlap_measure: densities must be normalized");
  return integrate(w1.grid, (w1.samples * w2.samples).sqrt());
}

// Fringe period 2 pi t / (m0 L) of the two-source pattern
// cos[p_f (x - (x1+x2)/2) + alpha12], p_f = m0 L / t.
template <typename Scalar>
Scalar fringe_spacing(Scalar m0, Scalar source_separation, Scalar t) {
  if (!(m0 > Scalar(0)) || !(source_separation > Scalar(0)) || !(t > Scalar(0)))
    throw std::invalid_argument("fringe_spacing: m0, L, t must all be positive");
  return Scalar(2) * static_cast<Scalar>(EIGEN_PI) * t / (m0 * source_separation);
}

template <typename Scalar = double>
struct FringePattern {
  std::vector<Scalar> peak_positions;  // parabolically refined local maxima
  Scalar mean_period = 0;              // median consecutive peak spacing
  Scalar visibility = 0;               // (max - min) / (max + min) over the window
};

// Peak statistics of a density within [x_lo, x_hi].
template <typename Scalar>
FringePattern<Scalar> measure_fringe_pattern(const Density<Scalar>& w, Scalar x_lo, Scalar x_hi) {
  if (!(x_lo < x_hi)) throw std::invalid_argument("measure_fringe_pattern: empty window");
  const Grid<Scalar>& grid = w.grid;
  const auto j_lo = static_cast<Eigen::Index>(std::ceil((x_lo - grid.x_min()) / grid.dx()));
  const auto j_hi = static_cast<Eigen::Index>(std::floor((x_hi - grid.x_min()) / grid.dx()));
  if (j_lo < 0 || j_hi >= grid.size() || j_hi - j_lo < 2)
    throw std::invalid_argument("measure_fringe_pattern: window outside the grid");

  FringePattern<Scalar> pattern;
  Scalar w_max = w.samples(j_lo), w_min = w.samples(j_lo);
  for (Eigen::Index j = j_lo; j <= j_hi; ++j) {
    w_max = std::max(w_max, w.samples(j));
    w_min = std::min(w_min, w.samples(j));
  }
  pattern.visibility = (w_max + w_min > Scalar(0)) ? (w_max - w_min) / (w_max + w_min) : Scalar(0);

  for (Eigen::Index j = std::max<Eigen::Index>(j_lo + 1, 1); j <= std::min(j_hi - 1, grid.size() - 2); ++j) {
    const Scalar y0 = w.samples(j - 1), y1 = w.samples(j), y2 = w.samples(j + 1);
    if (y1 > y0 && y1 > y2) {
      const Scalar denom = y0 - 2 * y1 + y2;
      const Scalar shift = (denom != Scalar(0)) ? (y0 - y2) / (2 * denom) : Scalar(0);
      pattern.peak_positions.push_back(grid.position(j) + shift * grid.dx());
    }
  }
  if (pattern.peak_positions.size() >= 2) {
    // Median spacing: the envelope pulls the outermost peaks inward, so the
    // central spacings are the trustworthy period estimate.
    std::vector<Scalar> gaps;
    for (std::size_t i = 0; i + 1 < pattern.peak_positions.size(); ++i)
      gaps.push_back(pattern.peak_positions[i + 1] - pattern.peak_positions[i]);
    std::sort(gaps.begin(), gaps.end());
    const std::size_t mid = gaps.size() / 2;
    pattern.mean_period =
        gaps.size() % 2 == 1 ? gaps[mid] : (gaps[mid - 1] + gaps[mid]) / 2;
  }
  return pattern;
}

template <typename Scalar = double>
struct TailFit {
  Scalar exponent = 0;
  Scalar x_lo = 0, x_hi = 0;
  Scalar residual = 0;  // rms of the log-log fit residuals
  Eigen::Index n_points = 0;
  bool used_envelope = false;  // fitted local maxima rather than raw samples
};

// Predicted far-field modulus exponent -(s-2)/(2(s-1)): 0 for s=2 (constant
// modulus), -1/3 for s=4, -2/5 for s=6.
template <typename Scalar = double>
Scalar tail_exponent_prediction(int s) {
  check_exponent<Scalar>(s);
  return -Scalar(s - 2) / (Scalar(2) * Scalar(s - 1));
}

// Least-squares slope of log|g| against log x over [x_lo, x_hi].  The s>=4
// asymptotic carries an oscillatory phase, so the fit uses the envelope
// (local maxima of |g|) when enough maxima exist; a monotone modulus (the
// s=2 case) falls back to the raw samples.
template <typename Scalar>
TailFit<Scalar> fit_tail_exponent(const FuzzyState<Scalar>& state, Scalar x_lo, Scalar x_hi) {
  if (!(x_lo > Scalar(0)) || !(x_hi > x_lo))
    throw std::invalid_argument("fit_tail_exponent: window must satisfy 0 < x_lo < x_hi");
  if (x_hi < Scalar(10) * x_lo)
    throw std::invalid_argument("fit_tail_exponent: window too narrow (< one decade)");
  if (x_hi > state.grid.x_max()) throw std::invalid_argument("fit_tail_exponent: window outside the grid");

  std::vector<Scalar> xs, mags;
  for (Eigen::Index j = 0; j < state.grid.size(); ++j) {
    const Scalar x = state.grid.position(j);
    if (x < x_lo || x > x_hi) continue;
    const Scalar mag = std::abs(state.samples(j));
    if (mag < Scalar(1e-12))
      throw std::invalid_argument("fit_tail_exponent: amplitude below floor inside the window");
    xs.push_back(x);
    mags.push_back(mag);
  }
  if (xs.size() < 16) throw std::invalid_argument("fit_tail_exponent: too few samples in the window");

  std::vector<Scalar> px, pm;
  for (std::size_t j = 1; j + 1 < mags.size(); ++j)
    if (mags[j] > mags[j - 1] && mags[j] > mags[j + 1]) {
      px.push_back(xs[j]);
      pm.push_back(mags[j]);
    }
  TailFit<Scalar> fit;
  fit.x_lo = x_lo;
  fit.x_hi = x_hi;
  fit.used_envelope = px.size() >= 8;
  if (!fit.used_envelope) {
    px = xs;
    pm = mags;
  }
  fit.n_points = static_cast<Eigen::Index>(px.size());

  Scalar sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < px.size(); ++j) {
    const Scalar lx = std::log(px[j]), ly = std::log(pm[j]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const auto m = static_cast<Scalar>(px.size());
  fit.exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const Scalar intercept = (sy - fit.exponent * sx) / m;
  Scalar rss = 0;
  for (std::size_t j = 0; j < px.size(); ++j) {
    const Scalar r = std::log(pm[j]) - (fit.exponent * std::log(px[j]) + intercept);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / m);
  return fit;
}

// Fixed, reproducible test-function families for delta-sequence functionals.
// Both peak at 1 on their center.  The bump has compact support
// [center - width, center + width] and must fit inside the grid; a Gaussian
// of very large width is the idiom for chi == 1 on the grid.
template <typename Scalar = double>
struct TestFunction {
  enum class Family { gaussian, bump };
  Family family = Family::gaussian;
  Scalar center = 0;
  Scalar width = 1;

  Scalar operator()(Scalar x) const {
    const Scalar u = (x - center) / width;
    if (family == Family::gaussian) return std::exp(-u * u / 2);
    if (u <= Scalar(-1) || u >= Scalar(1)) return 0;
    return std::exp(Scalar(1) - Scalar(1) / (Scalar(1) - u * u));
  }

  // chi''(center) / chi(center); sets the sigma_reg-limited floor of the
  // delta functional through I - chi(0) ~ (Sigma/2) chi''(0).
  Scalar curvature_at_center() const {
    return family == Family::gaussian ? -Scalar(1) / (width * width) : -Scalar(2) / (width * width);
  }
};

// I(chi, t) = sum chi(x_j) g(x_j) dx; tends to chi(center of the source) when
// g runs through a delta sequence.
template <typename Scalar>
std::complex<Scalar> delta_functional(const FuzzyState<Scalar>& state, const TestFunction<Scalar>& chi) {
  if (!(chi.width > Scalar(0))) throw std::invalid_argument("delta_functional: chi width must be positive");
  if (!state.grid.contains(chi.center))
    throw std::invalid_argument("delta_functional: chi center outside the grid");
  if (chi.family == TestFunction<Scalar>::Family::bump &&
      (chi.center - chi.width < state.grid.x_min() || chi.center + chi.width > state.grid.x_max()))
    throw std::invalid_argument("delta_functional: chi support exceeds the grid");
  std::complex<Scalar> acc(0, 0);
  for (Eigen::Index j = 0; j < state.grid.size(); ++j)
    acc += chi(state.grid.position(j)) * state.samples(j);
  return acc * state.grid.dx();
}

template <typename Scalar = double>
struct Moments {
  Scalar mean = 0;
  Scalar variance = 0;
  bool undefined_flag = false;  // moments unstable under window shrinking
  Scalar mean_90 = 0, mean_50 = 0;
  Scalar variance_90 = 0, variance_50 = 0;
};

namespace detail {

template <typename Scalar>
std::pair<Scalar, Scalar> window_moments(const Density<Scalar>& w, Scalar fraction) {
  const Eigen::Index n = w.grid.size();
  const auto half = static_cast<Eigen::Index>(static_cast<Scalar>(n) * fraction / 2);
  const Eigen::Index lo = n / 2 - half, hi = n / 2 + half;
  Scalar mass = 0, first = 0;
  for (Eigen::Index j = lo; j < hi; ++j) {
    mass += w.samples(j);
    first += w.samples(j) * w.grid.position(j);
  }
  if (!(mass > Scalar(0))) return {Scalar(0), Scalar(0)};
  const Scalar mean = first / mass;
  Scalar second = 0;
  for (Eigen::Index j = lo; j < hi; ++j) {
    const Scalar d = w.grid.position(j) - mean;
    second += w.samples(j) * d * d;
  }
  return {mean, second / mass};
}

}  // namespace detail

// Grid moments with a stability check: the mean and variance recomputed on
// the central 50% and 90% of the grid must agree within 5%, otherwise the
// moments are flagged undefined (heavy-tailed / x-limit regime, where the
// continuum moments do not exist).
template <typename Scalar>
Moments<Scalar> moments(const Density<Scalar>& w) {
  if (std::abs(norm(w) - Scalar(1)) > Scalar(density_norm_tolerance))
    throw std::invalid_argument("moments: density must be normalized");
  Moments<Scalar> result;
  const auto [mean_full, var_full] = detail::window_moments(w, Scalar(1));
  const auto [mean_90, var_90] = detail::window_moments(w, Scalar(0.9));
  const auto [mean_50, var_50] = detail::window_moments(w, Scalar(0.5));
  result.mean = mean_full;
  result.variance = var_full;
  result.mean_90 = mean_90;
  result.mean_50 = mean_50;
  result.variance_90 = var_90;
  result.variance_50 = var_50;
  const Scalar sigma_90 = std::sqrt(std::max(var_90, Scalar(0)));
  result.undefined_flag = std::abs(mean_50 - mean_90) > Scalar(0.05) * std::max(sigma_90, Scalar(1e-300)) ||
                          std::abs(var_50 - var_90) > Scalar(0.05) * var_90;
  return result;
}

// SplitMix64; the documented substream rule for parallel sampling:
// substream k of master seed s draws with seed substream_seed(s, k).
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

// n i.i.d. positions from a normalized grid density via inverse CDF over the
// cells [x_j, x_j + dx), uniform within a cell.  Driven by mt19937_64 with
// 53-bit uniforms ((u >> 11) * 2^-53), so fixed seeds reproduce bit-identical
// samples across platforms.
template <typename Scalar>
std::vector<Scalar> sample_positions(const Density<Scalar>& w, Eigen::Index count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_positions: count must be >= 1");
  if (std::abs(norm(w) - Scalar(1)) > Scalar(density_norm_tolerance))
    throw std::invalid_argument("sample_positions: density must be normalized");
  const Eigen::Index n = w.grid.size();
  std::vector<Scalar> cdf(static_cast<std::size_t>(n));
  Scalar acc = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    acc += std::max(w.samples(j), Scalar(0)) * w.grid.dx();
    cdf[static_cast<std::size_t>(j)] = acc;
  }
  const Scalar total = acc;

  std::mt19937_64 rng(seed);
  std::vector<Scalar> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto u53 = static_cast<Scalar>((rng() >> 11) * (1.0 / 9007199254740992.0));
    const Scalar u = u53 * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto j = static_cast<Eigen::Index>(std::min<std::ptrdiff_t>(it - cdf.begin(), n - 1));
    const Scalar lo = (j == 0) ? Scalar(0) : cdf[static_cast<std::size_t>(j - 1)];
    const Scalar cell_mass = cdf[static_cast<std::size_t>(j)] - lo;
    const Scalar frac = (cell_mass > Scalar(0)) ? (u - lo) / cell_mass : Scalar(0.5);
    out.push_back(w.grid.position(j) + frac * w.grid.dx());
  }
  return out;
}

}  // namespace fuzzy
