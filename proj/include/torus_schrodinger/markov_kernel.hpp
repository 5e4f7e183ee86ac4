#pragma once

#include "torus_schrodinger/potential.hpp"
#include "torus_schrodinger/torus_grid.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>

namespace ts {

/// Transition matrix of the Langevin semigroup P_t on a grid.
/// K(x, y) is the probability of moving from node x to node y in time t.
struct MarkovKernel {
  Grid grid;
  double t = 0.0;
  Eigen::MatrixXd K;
  Vec<double> m_weights;

  Index size() const { return K.rows(); }
};

struct KernelDefects {
  double row_sum = 0.0;        // max |sum_y K(x, y) - 1|
  double reversibility = 0.0;  // max |m(x) K(x, y) - m(y) K(y, x)|
  double min_entry = 0.0;
};

inline constexpr double kRowSumTol = 1e-10;
inline constexpr double kReversibilityTol = 1e-8;
inline constexpr double kClampTol = 1e-12;

/// Probability weights proportional to exp(-2 V(node)).
Vec<double> stationary_measure(const Grid& grid, const PotentialSpec& V);

/// Heat kernel exp(t Laplacian / 2) built from its Fourier symbol.
MarkovKernel heat_kernel_fft(const Grid& grid, double t);

enum class KernelMethod { kAuto, kExpm, kCrankNicolson };

/// Spatial discretization of the Laplacian inside the generator. Both
/// schemes produce an exactly m-reversible generator through the symmetric
/// form S = L/2 - diag(L rho / (2 rho)), rho = exp(-V), G = rho^-1 S rho.
enum class KernelScheme { kSpectral, kCentral2 };

struct KernelOptions {
  KernelMethod method = KernelMethod::kAuto;
  KernelScheme scheme = KernelScheme::kSpectral;
  /// Crank-Nicolson steps; 0 picks the smallest count with t/steps <= h^2/2.
  Index substeps = 0;
};

/// Largest node count for which kAuto uses the dense matrix exponential.
inline constexpr Index kDenseExpmMaxNodes = 4096;

/// Dense symmetric generator S of the chosen scheme.
Eigen::MatrixXd symmetric_generator(const Grid& grid, const PotentialSpec& V, KernelScheme scheme);

/// Generator G = rho^-1 S rho (rows sum to zero).
Eigen::MatrixXd generator(const Grid& grid, const PotentialSpec& V, KernelScheme scheme);

/// exp(t G) for general V. Throws Error when the result violates
/// stochasticity or reversibility, which signals an under-resolved grid.
MarkovKernel kernel_general(const Grid& grid, const PotentialSpec& V, double t, const KernelOptions& opts = {});

Index default_substeps(const Grid& grid, double t);

/// exp(t G) for many times from one eigendecomposition of the symmetric
/// generator; each kernel then costs one matrix product.
class KernelFamily {
 public:
  KernelFamily(const Grid& grid, const PotentialSpec& V, KernelScheme scheme = KernelScheme::kSpectral);

  MarkovKernel at(double t) const;
  const Grid& grid() const { return grid_; }
  /// Eigenvalues of the generator, ascending (the largest is 0).
  const Vec<double>& eigenvalues() const { return evals_; }

 private:
  Grid grid_;
  Vec<double> rho_, m_weights_, evals_;
  Eigen::MatrixXd evecs_;
};

KernelDefects kernel_defects(const MarkovKernel& k);

/// x -> log sum_y K(x, y) exp(g(y)) with a max shift.
GridFn apply_log(const MarkovKernel& k, const GridFn& g);

/// Builds through an on-disk cache when TS_CACHE_DIR (or cache_dir) is set.
/// Any unreadable or inconsistent cache file is rebuilt.
MarkovKernel cached_kernel(const Grid& grid, const PotentialSpec& V, double t, const KernelOptions& opts = {},
                           std::optional<std::filesystem::path> cache_dir = std::nullopt);

/// Cache file layout: 64-byte header then M*M little-endian float64 values,
/// row-major. Header fields, all little-endian:
///   0  char[8]  magic "TSKERNEL"
///   8  u32      version (1)
///  12  u32      d
///  16  u32      N
///  20  u32      substeps
///  24  f64      L
///  32  f64      t
///  40  u64      potential hash
///  48  u64      FNV-1a checksum of the payload bytes
///  56  u32      scheme
///  60  u32      method
struct KernelCacheKey {
  Grid grid;
  double t = 0.0;
  std::uint64_t vhash = 0;
  Index substeps = 0;
  KernelScheme scheme = KernelScheme::kSpectral;
  KernelMethod method = KernelMethod::kAuto;
};

std::string cache_file_name(const KernelCacheKey& key);
void write_kernel_cache(const std::filesystem::path& path, const KernelCacheKey& key, const Eigen::MatrixXd& K);
/// Returns nullopt if the file is missing, truncated, or fails any header or checksum test.
std::optional<Eigen::MatrixXd> read_kernel_cache(const std::filesystem::path& path, const KernelCacheKey& key);

}  // namespace ts
