#pragma once

#include "torus_schrodinger/torus_grid.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <limits>
#include <vector>

namespace ts {

enum class GradientMethod { kSpectral, kCentralDifference };
enum class LipMethod { kSpectral, kAllPairs };

namespace detail {

/// Signed wavenumber of FFT bin k for an N-point transform.
inline Index signed_mode(Index k, Index n) { return k <= n / 2 ? k : k - n; }

/// Applies a Fourier multiplier along one axis of a row-major N^d array.
/// symbol(k) receives the signed mode in [-N/2, N/2].
template <typename Scalar, typename Symbol>
Vec<Scalar> apply_axis_multiplier(const Vec<Scalar>& values, const TorusGrid<Scalar>& grid, int axis,
                                  Symbol&& symbol) {
  using Complex = std::complex<Scalar>;
  const Index n = grid.points_per_axis();
  Index stride = 1;
  for (int a = grid.dim() - 1; a > axis; --a) stride *= n;
  const Index block = stride * n;

  Eigen::FFT<Scalar> fft;
  std::vector<Complex> line(n), spec(n), back(n);
  std::vector<Complex> mult(n);
  for (Index k = 0; k < n; ++k) mult[k] = symbol(signed_mode(k, n));

  Vec<Scalar> out(values.size());
  for (Index outer = 0; outer < values.size(); outer += block) {
    for (Index inner = 0; inner < stride; ++inner) {
      const Index base = outer + inner;
      for (Index k = 0; k < n; ++k) line[k] = Complex(values[base + k * stride], Scalar(0));
      fft.fwd(spec, line);
      for (Index k = 0; k < n; ++k) spec[k] *= mult[k];
      fft.inv(back, spec);
      for (Index k = 0; k < n; ++k) out[base + k * stride] = back[k].real();
    }
  }
  return out;
}

/// Per-axis node coordinates (integer) for fast offset computation.
template <typename Scalar>
std::vector<std::array<Index, kMaxDim>> node_multi_indices(const TorusGrid<Scalar>& grid) {
  std::vector<std::array<Index, kMaxDim>> idx(grid.size());
  for (Index i = 0; i < grid.size(); ++i) idx[i] = grid.multi_index(i);
  return idx;
}

/// max over i != j of |f_i - f_j| / table[offset(i, j)]; entries of table
/// equal to +inf exclude that offset.
template <typename Scalar>
Scalar all_pairs_ratio(const GridFunction<Scalar>& f, const Vec<Scalar>& table) {
  const auto& grid = f.grid;
  if (grid.size() < 2) throw Error("Lipschitz norms need at least two nodes");
  const Index n = grid.points_per_axis();
  const int d = grid.dim();
  const auto idx = node_multi_indices(grid);
  Scalar best(0);
  for (Index i = 0; i < grid.size(); ++i) {
    for (Index j = i + 1; j < grid.size(); ++j) {
      Index o1 = 0, o2 = 0;
      for (int a = 0; a < d; ++a) {
        Index diff = idx[i][a] - idx[j][a];
        Index p = diff < 0 ? diff + n : diff;
        Index q = diff > 0 ? n - diff : -diff;
        o1 = o1 * n + p;
        o2 = o2 * n + q;
      }
      const Scalar gap = std::abs(f.values[i] - f.values[j]);
      // the distance tables are symmetric in the offset, so either order works
      const Scalar den = std::min(table[o1], table[o2]);
      if (std::isinf(static_cast<double>(den))) continue;
      best = std::max(best, gap / den);
    }
  }
  return best;
}

}  // namespace detail

/// Gradient as d grid functions. The spectral route is exact for
/// band-limited data (the Nyquist mode is dropped); the central-difference
/// route is the second-order periodic stencil.
template <typename Scalar>
std::vector<GridFunction<Scalar>> gradient(const GridFunction<Scalar>& f,
                                           GradientMethod method = GradientMethod::kSpectral) {
  const auto& grid = f.grid;
  const Index n = grid.points_per_axis();
  std::vector<GridFunction<Scalar>> out;
  out.reserve(grid.dim());
  for (int axis = 0; axis < grid.dim(); ++axis) {
    if (method == GradientMethod::kSpectral) {
      const Scalar k0 = Scalar(2) * std::numbers::pi_v<Scalar> / grid.side();
      auto symbol = [&](Index k) {
        if (2 * std::abs(k) == n) return std::complex<Scalar>(0);
        return std::complex<Scalar>(Scalar(0), k0 * static_cast<Scalar>(k));
      };
      out.emplace_back(grid, detail::apply_axis_multiplier(f.values, grid, axis, symbol));
    } else {
      Vec<Scalar> g(grid.size());
      const Scalar inv2h = Scalar(1) / (Scalar(2) * grid.spacing());
      for (Index i = 0; i < grid.size(); ++i) {
        MultiIndex fwd = grid.multi_index(i);
        MultiIndex bwd = fwd;
        fwd[axis] += 1;
        bwd[axis] -= 1;
        g[i] = (f.values[grid.flat_index(fwd)] - f.values[grid.flat_index(bwd)]) * inv2h;
      }
      out.emplace_back(grid, std::move(g));
    }
  }
  return out;
}

/// Spectral Laplacian (sum of second derivatives).
template <typename Scalar>
GridFunction<Scalar> laplacian(const GridFunction<Scalar>& f) {
  const auto& grid = f.grid;
  const Scalar k0 = Scalar(2) * std::numbers::pi_v<Scalar> / grid.side();
  Vec<Scalar> acc = Vec<Scalar>::Zero(grid.size());
  for (int axis = 0; axis < grid.dim(); ++axis) {
    auto symbol = [&](Index k) {
      const Scalar w = k0 * static_cast<Scalar>(k);
      return std::complex<Scalar>(-w * w, Scalar(0));
    };
    acc += detail::apply_axis_multiplier(f.values, grid, axis, symbol);
  }
  return GridFunction<Scalar>(grid, std::move(acc));
}

template <typename Scalar>
Scalar sup_norm(const GridFunction<Scalar>& f) {
  return f.values.cwiseAbs().maxCoeff();
}

/// Lipschitz constant with respect to the flat distance. The spectral route
/// returns max |grad f| over nodes; the all-pairs route is the O(M^2)
/// difference-quotient maximum.
template <typename Scalar>
Scalar lip_norm(const GridFunction<Scalar>& f, LipMethod method = LipMethod::kSpectral) {
  if (f.grid.size() < 2) throw Error("Lipschitz norms need at least two nodes");
  if (method == LipMethod::kAllPairs) {
    Vec<Scalar> table = flat_distance_table(f.grid);
    return detail::all_pairs_ratio(f, table);
  }
  const auto g = gradient(f, GradientMethod::kSpectral);
  Vec<Scalar> sq = Vec<Scalar>::Zero(f.grid.size());
  for (const auto& c : g) sq += c.values.cwiseAbs2();
  return std::sqrt(sq.maxCoeff());
}

/// sup over node pairs of |f(x) - f(y)| / distortion(delta(x, y)), where
/// delta is the sine distance; pairs closer than h/2 are skipped.
template <typename Scalar, typename Distortion>
Scalar distorted_lip_norm(const GridFunction<Scalar>& f, Distortion&& distortion) {
  Vec<Scalar> table = sine_distance_table(f.grid);
  const Scalar cutoff = f.grid.spacing() / Scalar(2);
  for (Index i = 0; i < table.size(); ++i) {
    if (table[i] < cutoff) {
      table[i] = std::numeric_limits<Scalar>::infinity();
    } else {
      const Scalar v = distortion(table[i]);
      if (!(v > Scalar(0))) throw Error("distortion must be strictly positive away from 0");
      table[i] = v;
    }
  }
  return detail::all_pairs_ratio(f, table);
}

/// Nodes and weights of the multilinear interpolation stencil at x.
template <typename Scalar>
struct Stencil {
  std::array<Index, 1 << kMaxDim> index{};
  std::array<Scalar, 1 << kMaxDim> weight{};
  int size = 0;
};

template <typename Scalar>
Stencil<Scalar> stencil(const TorusGrid<Scalar>& grid, const Point<Scalar>& x) {
  const int d = grid.dim();
  const Index n = grid.points_per_axis();
  const Scalar inv_h = static_cast<Scalar>(n) / grid.side();
  std::array<Index, kMaxDim> lo{0, 0, 0};
  std::array<Scalar, kMaxDim> frac{0, 0, 0};
  for (int a = 0; a < d; ++a) {
    const Scalar s = x[a] * inv_h;
    const Scalar fl = std::floor(s);
    Index i = static_cast<Index>(fl) % n;
    if (i < 0) i += n;
    lo[a] = i;
    frac[a] = s - fl;
  }
  Stencil<Scalar> st;
  st.size = 1 << d;
  for (int corner = 0; corner < st.size; ++corner) {
    Index flat = 0;
    Scalar w(1);
    for (int a = 0; a < d; ++a) {
      Index i = lo[a];
      if (corner & (1 << a)) {
        i = i + 1 == n ? 0 : i + 1;
        w *= frac[a];
      } else {
        w *= Scalar(1) - frac[a];
      }
      flat = flat * n + i;
    }
    st.index[corner] = flat;
    st.weight[corner] = w;
  }
  return st;
}

/// Multilinear interpolation of a grid function at an arbitrary point.
template <typename Scalar>
Scalar interpolate(const GridFunction<Scalar>& f, const Point<Scalar>& x) {
  const Stencil<Scalar> st = stencil(f.grid, x);
  Scalar acc(0);
  for (int c = 0; c < st.size; ++c) acc += st.weight[c] * f.values[st.index[c]];
  return acc;
}

/// Interpolates every component of a vector field with one stencil.
template <typename Scalar>
Point<Scalar> interpolate(const std::vector<GridFunction<Scalar>>& field, const Point<Scalar>& x) {
  Point<Scalar> out = Point<Scalar>::Zero(static_cast<Index>(field.size()));
  if (field.empty()) return out;
  const Stencil<Scalar> st = stencil(field.front().grid, x);
  for (std::size_t a = 0; a < field.size(); ++a) {
    Scalar acc(0);
    for (int c = 0; c < st.size; ++c) acc += st.weight[c] * field[a].values[st.index[c]];
    out[static_cast<Index>(a)] = acc;
  }
  return out;
}

/// Quadrature integral against a probability weight vector.
template <typename Scalar>
Scalar integrate(const GridFunction<Scalar>& f, const Vec<Scalar>& weights) {
  return f.values.dot(weights);
}

}  // namespace ts
