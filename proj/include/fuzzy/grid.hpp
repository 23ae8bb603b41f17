#pragma once

// Uniform periodic 1D lattice, its discrete Fourier dual, and the fields
// living on it.  Quadrature is the midpoint rule, which on a periodic grid
// is plain sum * dx and is consistent with the discrete Parseval identity.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace fuzzy {

template <typename Scalar>
using RealArray = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexArray = Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, 1>;

// Thrown when a numerical validity guard trips (e.g. an under-resolved
// oscillatory kernel).  Distinct from std::invalid_argument so runners can
// surface it as a failed diagnostic instead of a usage error.
class guard_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr Eigen::Index min_grid_points = 8;

// x_j = x_min + j*dx, j = 0..n-1, periodic with period L = x_max - x_min.
// Dual momenta p_k = 2*pi*k'/L with signed frequency index k' in [-n/2, n/2),
// stored in FFT order (0, 1, ..., -n/2, ..., -1).
template <typename Scalar = double>
class Grid {
 public:
  using Array = RealArray<Scalar>;

  Grid(Scalar x_min, Scalar x_max, Eigen::Index n) : x_min_(x_min), x_max_(x_max), n_(n) {
    if (!std::isfinite(x_min) || !std::isfinite(x_max))
      throw std::invalid_argument("Grid: bounds must be finite");
    if (!(x_max > x_min)) throw std::invalid_argument("Grid: x_max must exceed x_min");
    if (n < min_grid_points)
      throw std::invalid_argument("Grid: n must be at least " + std::to_string(min_grid_points));
    dx_ = (x_max - x_min) / static_cast<Scalar>(n);
  }

  Scalar x_min() const { return x_min_; }
  Scalar x_max() const { return x_max_; }
  Scalar dx() const { return dx_; }
  Scalar length() const { return x_max_ - x_min_; }
  Eigen::Index size() const { return n_; }

  Scalar position(Eigen::Index j) const { return x_min_ + dx_ * static_cast<Scalar>(j); }

  // Signed frequency index in [-n/2, n/2) for FFT storage index k.
  Eigen::Index frequency_index(Eigen::Index k) const { return (2 * k < n_) ? k : k - n_; }

  Scalar momentum(Eigen::Index k) const {
    constexpr Scalar two_pi = Scalar(2) * static_cast<Scalar>(EIGEN_PI);
    return two_pi * static_cast<Scalar>(frequency_index(k)) / length();
  }

  Array positions() const {
    return x_min_ + dx_ * Array::LinSpaced(n_, Scalar(0), static_cast<Scalar>(n_ - 1));
  }

  // Momenta in FFT storage order, matching the layout of fft_forward output.
  Array momenta() const {
    Array p(n_);
    for (Eigen::Index k = 0; k < n_; ++k) p(k) = momentum(k);
    return p;
  }

  // Largest momentum magnitude on the dual lattice (pi/dx for even n).
  Scalar momentum_max() const {
    return static_cast<Scalar>(EIGEN_PI) / dx_ * (n_ % 2 == 0 ? Scalar(1) : Scalar(n_ - 1) / Scalar(n_));
  }

  // Displacement wrapped into [-L/2, L/2); periodic distance on the ring.
  Scalar wrap(Scalar displacement) const {
    const Scalar L = length();
    Scalar d = std::fmod(displacement + L / 2, L);
    if (d < 0) d += L;
    return d - L / 2;
  }

  bool contains(Scalar x) const { return x >= x_min_ && x < x_max_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.x_min_ == b.x_min_ && a.x_max_ == b.x_max_ && a.n_ == b.n_;
  }

 private:
  Scalar x_min_, x_max_, dx_;
  Eigen::Index n_;
};

template <typename Scalar = double>
Grid<Scalar> make_grid(Scalar x_min, Scalar x_max, Eigen::Index n) {
  return Grid<Scalar>(x_min, x_max, n);
}

// Complex amplitude field g(x) sampled on a grid.  The local phase arg g(x)
// carries the correlation degree of freedom; |g|^2 is the density.
template <typename Scalar = double>
struct FuzzyState {
  Grid<Scalar> grid;
  ComplexArray<Scalar> samples;
  Scalar time = 0;
};

// Nonnegative real field w(x) >= 0 with quadrature norm.
template <typename Scalar = double>
struct Density {
  Grid<Scalar> grid;
  RealArray<Scalar> samples;
  Scalar time = 0;
};

// Real field without a sign constraint (the oscillating interference term).
template <typename Scalar = double>
struct SignedField {
  Grid<Scalar> grid;
  RealArray<Scalar> samples;
  Scalar time = 0;
};

using GridD = Grid<double>;
using FuzzyStateD = FuzzyState<double>;
using DensityD = Density<double>;
using SignedFieldD = SignedField<double>;

// Midpoint quadrature of an arbitrary Eigen expression over the grid.
template <typename Scalar, typename Derived>
typename Derived::Scalar integrate(const Grid<Scalar>& grid, const Eigen::ArrayBase<Derived>& field) {
  return field.sum() * grid.dx();
}

template <typename Scalar>
void require_finite(const ComplexArray<Scalar>& samples, const char* what) {
  if (!samples.isFinite().all()) throw std::invalid_argument(std::string(what) + ": non-finite samples");
}

// N2 = sum |g_j|^2 dx.
template <typename Scalar>
Scalar norm2(const FuzzyState<Scalar>& state) {
  return integrate(state.grid, state.samples.abs2());
}

template <typename Scalar>
Scalar norm(const Density<Scalar>& w) {
  return integrate(w.grid, w.samples);
}

// Rescales so that norm2 == 1.  Idempotent; rejects the zero field.
template <typename Scalar>
FuzzyState<Scalar> normalize(const FuzzyState<Scalar>& state) {
  const Scalar n2 = norm2(state);
  if (!(n2 > Scalar(0))) throw std::invalid_argument("normalize: zero-norm state");
  return {state.grid, state.samples / std::sqrt(n2), state.time};
}

template <typename Scalar>
Scalar l2_distance(const FuzzyState<Scalar>& a, const FuzzyState<Scalar>& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("l2_distance: grid mismatch");
  return std::sqrt(integrate(a.grid, (a.samples - b.samples).abs2()));
}

template <typename Scalar>
Scalar relative_l2_distance(const FuzzyState<Scalar>& a, const FuzzyState<Scalar>& b) {
  return l2_distance(a, b) / std::sqrt(norm2(b));
}

// Unscaled DFT pair; inverse carries the 1/n so the round trip is identity.
template <typename Scalar>
ComplexArray<Scalar> fft_forward(const ComplexArray<Scalar>& in) {
  thread_local Eigen::FFT<Scalar> engine;
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> src = in.matrix(), dst;
  engine.fwd(dst, src);
  return dst.array();
}

template <typename Scalar>
ComplexArray<Scalar> fft_inverse(const ComplexArray<Scalar>& in) {
  thread_local Eigen::FFT<Scalar> engine;
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> src = in.matrix(), dst;
  engine.inv(dst, src);
  return dst.array();
}

}  // namespace fuzzy
