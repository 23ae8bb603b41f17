// Analysis-layer tests.  Frozen closed-form expectations:
//   R_w of two unit gaussian densities (std sigma, centers d apart)
//     = exp(-d^2/(8 sigma^2)):  d/sigma = 0,1,2,4
//     -> 1, 0.8824969025845955, 0.6065306597126334, 0.1353352832366127
//   fringe spacing 2 pi t/(m0 L): m0=1, L=10, t=1 -> 0.6283185307179586
//   delta functional of the evolved unit-mass gaussian against a gaussian
//     chi: I = (1 + Sigma/a^2)^(-1/2) exp(-(c-x0)^2/(2(Sigma+a^2))),
//     Sigma = sigma_reg^2 + i t/m0.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "fuzzy/analysis.hpp"
#include "fuzzy/kernels.hpp"

using namespace fuzzy;

namespace {

Density<double> gaussian_density(const Grid<double>& grid, double center, double sigma) {
  RealArray<double> w(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const double d = grid.position(j) - center;
    w(j) = std::exp(-d * d / (2 * sigma * sigma)) / (sigma * std::sqrt(2 * EIGEN_PI));
  }
  return {grid, std::move(w), 0.0};
}

double ks_statistic_uniform(std::vector<double> samples, double a, double b) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = (samples[i] - a) / (b - a);
    d = std::max(d, std::max(std::abs(f - static_cast<double>(i) / n),
                             std::abs(f - static_cast<double>(i + 1) / n)));
  }
  return d;
}

}  // namespace

TEST_CASE("density basics") {
  const auto grid = make_grid(-50.0, 50.0, 1024);
  const auto state = build_source_state(grid, {{{0.0, 1.0, 0.0}}, 1.0});
  const auto w = density(state);
  CHECK(std::abs(norm(w) - 1.0) <= 1e-12);

  const FuzzyState<double> zero{grid, ComplexArray<double>::Zero(grid.size()), 0.0};
  CHECK(density(zero).samples.maxCoeff() == 0.0);

  // a global phase leaves the density unchanged
  const std::complex<double> phase = std::exp(std::complex<double>(0.0, 1.234));
  const FuzzyState<double> rotated{grid, phase * state.samples, 0.0};
  CHECK((density(rotated).samples - w.samples).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("mixed density of a single member is the member density") {
  const auto grid = make_grid(-50.0, 50.0, 2048);
  const SourceSpec<double> sources{{{1.0, 1.0, 0.0}}, 0.5};
  const EnsembleSpec<double> ensemble{{{1.0, sources}}};
  const EvolutionSpec<double> evolution{2, 1.0, 1.5, 0.0, std::nullopt};
  const auto mixed = mixed_density(grid, ensemble, evolution);
  const auto direct = density(evolve_spectral(build_source_state(grid, sources), 2, 1.0, 1.5));
  CHECK((mixed.samples - direct.samples).abs().maxCoeff() == 0.0);
}

TEST_CASE("mixed density is exactly linear in the probabilities") {
  const auto grid = make_grid(-50.0, 50.0, 2048);
  const SourceSpec<double> left{{{-5.0, 1.0, 0.0}}, 0.4};
  const SourceSpec<double> right{{{5.0, 1.0, 0.0}}, 0.4};
  const EnsembleSpec<double> ensemble{{{0.3, left}, {0.7, right}}};
  const EvolutionSpec<double> evolution{2, 1.0, 2.0, 0.0, std::nullopt};
  const auto mixed = mixed_density(grid, ensemble, evolution);

  RealArray<double> manual = RealArray<double>::Zero(grid.size());
  manual += 0.3 * evolve_spectral(build_source_state(grid, left), 2, 1.0, 2.0).samples.abs2();
  manual += 0.7 * evolve_spectral(build_source_state(grid, right), 2, 1.0, 2.0).samples.abs2();
  CHECK((mixed.samples - manual).abs().maxCoeff() == 0.0);
}

TEST_CASE("two-source decomposition: zero integral, oscillation, bound, no linear content") {
  const auto grid = make_grid(-50.0, 50.0, 4096);
  const auto parts = build_source_components(grid, {{{-5.0, 0.5, 0.0}, {5.0, 0.5, 0.0}}, 0.3});
  std::vector<FuzzyState<double>> members;
  for (const auto& m : parts.members) members.push_back(evolve_spectral(m, 2, 1.0, 2.0));
  const auto result = decompose(evolve_spectral(parts.pure, 2, 1.0, 2.0), members);

  CHECK(std::abs(result.w_n_integral) <= 1e-8);
  CHECK(result.w_n_min < 0.0);
  CHECK(result.bound_excess <= 1e-12);
  CHECK(result.projection_coeff <= 1e-3);
  CHECK(result.l_g == 1);

  // pointwise reconstruction w_s = w_m + w_n
  CHECK((result.w_s.samples - result.w_m.samples - result.w_n.samples).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("nonlinear term vanishes as one weight goes to zero") {
  const auto grid = make_grid(-50.0, 50.0, 4096);
  double previous = 1e300;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const auto parts = build_source_components(grid, {{{-5.0, 1.0 - eps, 0.0}, {5.0, eps, 0.0}}, 0.3});
    std::vector<FuzzyState<double>> members;
    for (const auto& m : parts.members) members.push_back(evolve_spectral(m, 2, 1.0, 2.0));
    const auto result = decompose(evolve_spectral(parts.pure, 2, 1.0, 2.0), members);
    const double wn_max = result.w_n.samples.abs().maxCoeff();
    CHECK(wn_max < previous);
    CHECK(wn_max <= 3.0 * std::sqrt(eps));
    previous = wn_max;
  }
}

TEST_CASE("decompose rejects mismatched inputs") {
  const auto grid = make_grid(-50.0, 50.0, 1024);
  const auto other_grid = make_grid(-40.0, 40.0, 1024);
  const auto parts = build_source_components(grid, {{{-5.0, 0.5, 0.0}, {5.0, 0.5, 0.0}}, 0.5});
  const auto pure_t = evolve_spectral(parts.pure, 2, 1.0, 1.0);

  std::vector<FuzzyState<double>> stale{evolve_spectral(parts.members[0], 2, 1.0, 0.5),
                                        evolve_spectral(parts.members[1], 2, 1.0, 0.5)};
  CHECK_THROWS_AS(decompose(pure_t, stale), std::invalid_argument);

  std::vector<FuzzyState<double>> foreign{
      {other_grid, ComplexArray<double>::Zero(1024), 1.0},
      {other_grid, ComplexArray<double>::Zero(1024), 1.0}};
  CHECK_THROWS_AS(decompose(pure_t, foreign), std::invalid_argument);
  CHECK_THROWS_AS(decompose(pure_t, {}), std::invalid_argument);
}

TEST_CASE("overlap measure against the gaussian closed form") {
  const auto grid = make_grid(-50.0, 50.0, 4096);
  const double sigma = 1.0;
  const double expected[] = {1.0, 0.8824969025845955, 0.6065306597126334, 0.1353352832366127};
  int i = 0;
  for (double d : {0.0, 1.0, 2.0, 4.0}) {
    const auto w1 = gaussian_density(grid, -d / 2, sigma);
    const auto w2 = gaussian_density(grid, d / 2, sigma);
    CHECK(std::abs(overlap_measure(w1, w2) - expected[i++]) <= 1e-6);
  }
}

TEST_CASE("overlap measure bounds and edge cases") {
  const auto grid = make_grid(-50.0, 50.0, 2048);
  const auto w = gaussian_density(grid, 0.0, 2.0);
  CHECK(std::abs(overlap_measure(w, w) - 1.0) <= 1e-10);

  const auto far1 = gaussian_density(grid, -20.0, 1.0);
  const auto far2 = gaussian_density(grid, 20.0, 1.0);
  CHECK(overlap_measure(far1, far2) <= 1e-10);

  Density<double> unnormalized{grid, 2.0 * w.samples, 0.0};
  CHECK_THROWS_AS(overlap_measure(w, unnormalized), std::invalid_argument);

  // random normalized densities stay in [0, 1]
  std::mt19937_64 rng(4321);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    RealArray<double> a(grid.size()), b(grid.size());
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      a(j) = uniform(rng);
      b(j) = uniform(rng);
    }
    const Density<double> wa{grid, a / (a.sum() * grid.dx()), 0.0};
    const Density<double> wb{grid, b / (b.sum() * grid.dx()), 0.0};
    const double r = overlap_measure(wa, wb);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0 + 1e-12);
  }
}

TEST_CASE("overlap is 1 only for identical densities") {
  const auto grid = make_grid(-50.0, 50.0, 2048);
  const auto w1 = gaussian_density(grid, 0.0, 2.0);
  const auto w2 = gaussian_density(grid, 0.05, 2.0);
  CHECK(overlap_measure(w1, w2) < 1.0 - 1e-6);
  CHECK(overlap_measure(w1, w1) >= 1.0 - 1e-10);
}

TEST_CASE("fringe spacing closed form") {
  CHECK(fringe_spacing(1.0, 10.0, 1.0) == doctest::Approx(0.6283185307179586).epsilon(1e-14));
  CHECK(fringe_spacing(1.0, 10.0, 2.0) == doctest::Approx(2 * 0.6283185307179586).epsilon(1e-14));
  CHECK_THROWS_AS(fringe_spacing(0.0, 10.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(fringe_spacing(1.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(fringe_spacing(1.0, 10.0, 0.0), std::invalid_argument);
}

TEST_CASE("visibility tracks the member overlap") {
  // Strong overlap (R_w >= 0.99): full contrast at the pattern center.
  const auto grid = make_grid(-400.0, 400.0, 32768);
  const auto parts = build_source_components(grid, {{{-5.0, 0.5, 0.0}, {5.0, 0.5, 0.0}}, 0.3});
  const double t = 16.0;
  std::vector<FuzzyState<double>> members;
  for (const auto& m : parts.members) members.push_back(evolve_spectral(m, 2, 1.0, t));
  const auto pure = evolve_spectral(parts.pure, 2, 1.0, t);

  const double r_w = overlap_measure(density(normalize(members[0])), density(normalize(members[1])));
  CHECK(r_w >= 0.99);
  const double period = fringe_spacing(1.0, 10.0, t);
  const auto central = measure_fringe_pattern(density(pure), -period / 2, period / 2);
  CHECK(central.visibility >= 0.98);

  // Vanishing overlap: the interference term is a negligible fraction of the
  // pattern; no appreciable fringes anywhere.
  const auto small_grid = make_grid(-50.0, 50.0, 4096);
  const auto far = build_source_components(small_grid, {{{-15.0, 0.5, 0.0}, {15.0, 0.5, 0.0}}, 0.4});
  std::vector<FuzzyState<double>> far_members;
  for (const auto& m : far.members) far_members.push_back(evolve_spectral(m, 2, 1.0, 0.5));
  const auto far_result = decompose(evolve_spectral(far.pure, 2, 1.0, 0.5), far_members);
  const double r_far =
      overlap_measure(density(normalize(far_members[0])), density(normalize(far_members[1])));
  CHECK(r_far <= 1e-4);
  CHECK(far_result.w_n.samples.abs().maxCoeff() <= 0.05 * far_result.w_s.samples.maxCoeff());
}

TEST_CASE("tail exponent fit: s = 4 delta-like source") {
  const auto grid = make_grid(-4000.0, 4000.0, 131072);
  const auto state = build_source_state(grid, {{{0.0, 1.0, 0.0}}, 0.15});
  const auto evolved = evolve_spectral(state, 4, 1.0, 4.0);
  const auto fit = fit_tail_exponent(evolved, 2.0, 30.0);
  CHECK(fit.used_envelope);
  CHECK(std::abs(fit.exponent - tail_exponent_prediction<double>(4)) <= 0.05);
}

TEST_CASE("tail exponent predictions") {
  CHECK(tail_exponent_prediction<double>(2) == 0.0);
  CHECK(tail_exponent_prediction<double>(4) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(tail_exponent_prediction<double>(6) == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK_THROWS_AS(tail_exponent_prediction<double>(3), std::invalid_argument);
}

TEST_CASE("tail fit validation") {
  const auto grid = make_grid(-50.0, 50.0, 4096);
  const auto state = gaussian_free_closed_form(grid, 1.0, 0.0, 0.0, 1.0, 0.0);
  CHECK_THROWS_AS(fit_tail_exponent(state, 2.0, 10.0), std::invalid_argument);   // < one decade
  CHECK_THROWS_AS(fit_tail_exponent(state, 2.0, 60.0), std::invalid_argument);   // beyond the grid
  CHECK_THROWS_AS(fit_tail_exponent(state, 2.0, 30.0), std::invalid_argument);   // amplitude underflow
  CHECK_THROWS_AS(fit_tail_exponent(state, -2.0, 30.0), std::invalid_argument);  // bad window
}

TEST_CASE("delta functional: regularized identity and chi == 1 idiom") {
  const auto grid = make_grid(-20.0, 20.0, 4096);
  const auto profile = build_unit_mass_source(grid, 1.0, 0.05);

  const TestFunction<double> chi{TestFunction<double>::Family::gaussian, 1.0, 1.0};
  CHECK(std::abs(delta_functional(profile, chi) - std::complex<double>(chi(1.0), 0)) <= 3e-3);

  // chi == 1 on the grid: a very wide gaussian; I = integral of g.
  const TestFunction<double> flat{TestFunction<double>::Family::gaussian, 0.0, 1e6};
  CHECK(std::abs(delta_functional(profile, flat) - std::complex<double>(1.0, 0)) <= 1e-6);

  const TestFunction<double> wide_bump{TestFunction<double>::Family::bump, 19.5, 2.0};
  CHECK_THROWS_AS(delta_functional(profile, wide_bump), std::invalid_argument);
}

TEST_CASE("delta sequence: deviation decreases monotonically to the floor") {
  const auto grid = make_grid(-20.0, 20.0, 4096);
  const double sigma = 0.05;
  const auto profile = build_unit_mass_source(grid, 0.0, sigma);
  const TestFunction<double> chi{TestFunction<double>::Family::gaussian, 0.0, 1.0};
  const TestFunction<double> bump{TestFunction<double>::Family::bump, 0.0, 2.0};

  double prev_g = 1e300, prev_b = 1e300, last_g = 0;
  for (int k = 0; k <= 6; ++k) {
    const double t = 0.1 * std::pow(2.0, -k);
    const auto evolved = evolve_spectral(profile, 2, 1.0, t);
    const std::complex<double> ig = delta_functional(evolved, chi);
    const std::complex<double> ib = delta_functional(evolved, bump);

    // gaussian-smeared Fresnel integral, closed form
    const std::complex<double> Sigma(sigma * sigma, t);
    const std::complex<double> expected = 1.0 / std::sqrt(1.0 + Sigma);
    CHECK(std::abs(ig - expected) <= 1e-9);

    const double dev_g = std::abs(ig - std::complex<double>(1.0, 0));
    const double dev_b = std::abs(ib - std::complex<double>(1.0, 0));
    CHECK(dev_g < prev_g);
    CHECK(dev_b < prev_b);
    prev_g = dev_g;
    prev_b = dev_b;
    last_g = dev_g;
  }
  const double floor = std::abs(1.0 / std::sqrt(1.0 + sigma * sigma) - 1.0);
  CHECK(last_g >= floor);
  CHECK(last_g <= 1.4 * floor);
}

TEST_CASE("moments: gaussian, translation covariance, undefined flag") {
  const auto grid = make_grid(-50.0, 50.0, 4096);
  const auto w = gaussian_density(grid, 0.0, 2.0);
  const auto m = moments(w);
  CHECK(std::abs(m.mean) <= 1e-8);
  CHECK(m.variance == doctest::Approx(4.0).epsilon(1e-6));
  CHECK_FALSE(m.undefined_flag);

  const auto shifted = moments(gaussian_density(grid, 3.0, 2.0));
  CHECK(shifted.mean == doctest::Approx(m.mean + 3.0).epsilon(1e-8));

  // near-uniform density: grid moments are window-dependent -> undefined
  RealArray<double> flat = RealArray<double>::Constant(grid.size(), 1.0 / grid.length());
  CHECK(moments(Density<double>{grid, flat, 0.0}).undefined_flag);

  Density<double> unnormalized{grid, 2.0 * w.samples, 0.0};
  CHECK_THROWS_AS(moments(unnormalized), std::invalid_argument);
}

TEST_CASE("evolved delta-like state under s = 2 has undefined moments") {
  const auto grid = make_grid(-50.0, 50.0, 4096);
  const auto state = build_source_state(grid, {{{0.0, 1.0, 0.0}}, 0.1});
  const auto w = density(evolve_spectral(state, 2, 1.0, 40.0));
  CHECK(moments(w).undefined_flag);
}

TEST_CASE("position sampling: determinism and distribution") {
  const auto grid = make_grid(-10.0, 10.0, 2048);
  RealArray<double> flat = RealArray<double>::Constant(grid.size(), 1.0 / grid.length());
  const Density<double> uniform{grid, flat, 0.0};

  const auto a = sample_positions(uniform, 100000, 20240817);
  const auto b = sample_positions(uniform, 100000, 20240817);
  CHECK(a == b);
  const auto c = sample_positions(uniform, 1000, 1);
  const auto d = sample_positions(uniform, 1000, 2);
  CHECK(c != d);

  double mean = 0;
  for (double x : a) mean += x;
  mean /= static_cast<double>(a.size());
  CHECK(std::abs(mean) <= 0.05);

  // KS vs the uniform law, 1% critical value 1.6276/sqrt(n)
  CHECK(ks_statistic_uniform(a, -10.0, 10.0) <= 1.6276 / std::sqrt(100000.0));
}

TEST_CASE("two-slit sampling reproduces the fringe peaks") {
  const auto grid = make_grid(-50.0, 50.0, 4096);
  const auto parts = build_source_components(grid, {{{-5.0, 0.5, 0.0}, {5.0, 0.5, 0.0}}, 0.3});
  const auto w = density(evolve_spectral(parts.pure, 2, 1.0, 2.0));
  const auto samples = sample_positions(w, 200000, 99);
  const auto pattern = measure_fringe_pattern(w, -4.0, 4.0);
  REQUIRE(pattern.peak_positions.size() >= 3);
  const double period = fringe_spacing(1.0, 10.0, 2.0);

  auto count_near = [&](double center) {
    std::size_t count = 0;
    for (double x : samples)
      if (std::abs(x - center) <= period / 8) ++count;
    return count;
  };
  for (const double peak : pattern.peak_positions) {
    // occupancy at a fringe maximum dwarfs the adjacent minimum
    CHECK(count_near(peak) >= 3 * (count_near(peak + period / 2) + 1));
  }
}

TEST_CASE("sampling validation") {
  const auto grid = make_grid(-10.0, 10.0, 256);
  RealArray<double> flat = RealArray<double>::Constant(grid.size(), 1.0 / grid.length());
  const Density<double> uniform{grid, flat, 0.0};
  CHECK_THROWS_AS(sample_positions(uniform, 0, 7), std::invalid_argument);
  const Density<double> unnormalized{grid, 3.0 * flat, 0.0};
  CHECK_THROWS_AS(sample_positions(unnormalized, 10, 7), std::invalid_argument);
}

TEST_CASE("substream seeds are deterministic and distinct") {
  CHECK(substream_seed(42, 0) == substream_seed(42, 0));
  CHECK(substream_seed(42, 0) != substream_seed(42, 1));
  CHECK(substream_seed(42, 1) != substream_seed(43, 1));
}
