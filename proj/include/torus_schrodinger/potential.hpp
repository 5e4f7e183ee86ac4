#pragma once

#include "torus_schrodinger/torus_grid.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace ts {

/// One axis of the trigonometric family
/// V(x) = (L/8) sum_i alpha_i sin(2 pi x_i / L + omega_i) + beta_i cos(2 pi x_i / L + omega_i).
struct TrigTerm {
  double alpha = 0.0;
  double beta = 0.0;
  double omega = 0.0;

  double sigma() const { return std::hypot(alpha, beta); }
  friend bool operator==(const TrigTerm&, const TrigTerm&) = default;
};

/// Confining potential V of the Langevin dynamics dX = -grad V dt + dB.
///
/// Axis coefficients of the trigonometric family are kept in axis order so
/// that V itself is unchanged; sorted_sigmas() gives the descending
/// amplitudes used by the semiconvexity modulus.
class PotentialSpec {
 public:
  enum class Kind { kZero, kTrigonometric, kTabulated };

  /// V identically zero (Brownian motion).
  PotentialSpec() = default;

  static PotentialSpec zero() { return PotentialSpec(); }
  static PotentialSpec trigonometric(std::vector<TrigTerm> terms, double side);
  static PotentialSpec tabulated(const GridFn& values);

  Kind kind() const { return kind_; }
  bool is_zero() const { return kind_ == Kind::kZero; }
  const std::vector<TrigTerm>& terms() const { return terms_; }
  double side() const { return side_; }

  double value(const Point<double>& x) const;
  Point<double> gradient(const Point<double>& x) const;

  /// V at every node.
  GridFn sample(const Grid& grid) const;

  /// sigma_i sorted so sigma_1 >= ... >= sigma_d; empty for other kinds.
  std::vector<double> sorted_sigmas() const;

  /// Stable 64-bit content hash (FNV-1a over kind and parameters).
  std::uint64_t hash() const;

 private:
  Kind kind_ = Kind::kZero;
  std::vector<TrigTerm> terms_;
  double side_ = 1.0;
  std::shared_ptr<const GridFn> table_;
  std::shared_ptr<const std::vector<GridFn>> table_grad_;
};

}  // namespace ts
