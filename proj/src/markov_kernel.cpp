#include "torus_schrodinger/markov_kernel.hpp"

#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/MatrixFunctions>

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ts {

namespace {

/// First column of the 1-d circulant Laplacian.
Vec<double> laplacian_stencil(const Grid& grid, KernelScheme scheme) {
  const Index n = grid.points_per_axis();
  Vec<double> c = Vec<double>::Zero(n);
  if (scheme == KernelScheme::kCentral2) {
    const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    c[0] = -2.0 * inv_h2;
    c[1] += inv_h2;
    c[n - 1] += inv_h2;
    return c;
  }
  const double k0 = 2.0 * std::numbers::pi / grid.side();
  std::vector<std::complex<double>> symbol(n), out(n);
  for (Index k = 0; k < n; ++k) {
    const double w = k0 * static_cast<double>(k <= n / 2 ? k : k - n);
    symbol[k] = -w * w;
  }
  Eigen::FFT<double> fft;
  fft.inv(out, symbol);
  for (Index j = 0; j < n; ++j) c[j] = out[j].real();
  // the symbol is even, so the stencil is symmetric; enforce it exactly
  for (Index j = 1; j < n; ++j) {
    const double s = 0.5 * (c[j] + c[n - j]);
    c[j] = s;
    c[n - j] = s;
  }
  return c;
}

/// Dense tensor-sum operator sum_a c(j_a - i_a) delta(other axes).
Eigen::MatrixXd tensor_sum(const Grid& grid, const Vec<double>& c) {
  const Index m = grid.size();
  const Index n = grid.points_per_axis();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    const MultiIndex mi = grid.multi_index(i);
    for (int a = 0; a < grid.dim(); ++a) {
      MultiIndex mj = mi;
      for (Index ja = 0; ja < n; ++ja) {
        mj[a] = ja;
        Index off = (ja - mi[a]) % n;
        if (off < 0) off += n;
        A(i, grid.flat_index(mj)) += c[off];
      }
    }
  }
  return A;
}

/// Circulant tensor product sum_a ... with per-axis 1-d kernel c: A(i, j) = prod_a c(j_a - i_a).
Eigen::MatrixXd tensor_product(const Grid& grid, const Vec<double>& c) {
  const Index m = grid.size();
  const Index n = grid.points_per_axis();
  Eigen::MatrixXd A(m, m);
  for (Index i = 0; i < m; ++i) {
    const MultiIndex mi = grid.multi_index(i);
    for (Index j = 0; j < m; ++j) {
      const MultiIndex mj = grid.multi_index(j);
      double v = 1.0;
      for (int a = 0; a < grid.dim(); ++a) {
        Index off = (mj[a] - mi[a]) % n;
        if (off < 0) off += n;
        v *= c[off];
      }
      A(i, j) = v;
    }
  }
  return A;
}

/// rho = exp(-V) shifted so that max rho = 1.
Vec<double> ground_state(const Grid& grid, const PotentialSpec& V) {
  const Vec<double> v = V.sample(grid).values;
  return (-(v.array() - v.minCoeff())).exp().matrix();
}

/// Validates a freshly computed kernel, clamps roundoff negatives and
/// renormalizes rows. Throws on anything beyond the tolerances.
void finalize(MarkovKernel& k) {
  const double min_entry = k.K.minCoeff();
  if (min_entry < -kClampTol) {
    std::ostringstream os;
    os << "kernel has entry " << min_entry << " < -" << kClampTol
       << " at t = " << k.t << "; the discretization is under-resolved (raise N or substeps)";
    throw Error(os.str());
  }
  k.K = k.K.cwiseMax(0.0);
  const KernelDefects pre = kernel_defects(k);
  if (pre.row_sum > kRowSumTol || pre.reversibility > kReversibilityTol) {
    std::ostringstream os;
    os << "kernel violates stochasticity/reversibility (row-sum defect " << pre.row_sum
       << ", reversibility defect " << pre.reversibility << ") at t = " << k.t
       << "; the discretization is under-resolved (raise N or substeps)";
    throw Error(os.str());
  }
  const Vec<double> rows = k.K.rowwise().sum();
  for (Index i = 0; i < k.K.rows(); ++i) k.K.row(i) /= rows[i];
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}
void put_u64(std::string& s, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}
void put_f64(std::string& s, double v) { put_u64(s, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(p[b]);
  return v;
}
std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(p[b]);
  return v;
}
double get_f64(const char* p) { return std::bit_cast<double>(get_u64(p)); }

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr char kMagic[8] = {'T', 'S', 'K', 'E', 'R', 'N', 'E', 'L'};
constexpr std::uint32_t kCacheVersion = 1;
constexpr std::size_t kHeaderBytes = 64;

std::string encode_payload(const Eigen::MatrixXd& K) {
  std::string s;
  s.reserve(static_cast<std::size_t>(K.size()) * 8);
  for (Index i = 0; i < K.rows(); ++i)
    for (Index j = 0; j < K.cols(); ++j) put_f64(s, K(i, j));
  return s;
}

}  // namespace

Vec<double> stationary_measure(const Grid& grid, const PotentialSpec& V) {
  const Vec<double> e = -2.0 * V.sample(grid).values;
  Vec<double> w = (e.array() - e.maxCoeff()).exp().matrix();
  return w / w.sum();
}

MarkovKernel heat_kernel_fft(const Grid& grid, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error("kernel time must be positive and finite");
  const Index n = grid.points_per_axis();
  const double k0 = 2.0 * std::numbers::pi / grid.side();
  std::vector<std::complex<double>> symbol(n), out(n);
  for (Index k = 0; k < n; ++k) {
    const double w = k0 * static_cast<double>(k <= n / 2 ? k : k - n);
    symbol[k] = std::exp(-0.5 * t * w * w);
  }
  Eigen::FFT<double> fft;
  fft.inv(out, symbol);
  Vec<double> c(n);
  for (Index j = 0; j < n; ++j) c[j] = out[j].real();
  for (Index j = 1; j < n; ++j) {
    const double s = 0.5 * (c[j] + c[n - j]);
    c[j] = s;
    c[n - j] = s;
  }
  MarkovKernel k;
  k.grid = grid;
  k.t = t;
  k.K = tensor_product(grid, c);
  k.m_weights = Vec<double>::Constant(grid.size(), 1.0 / static_cast<double>(grid.size()));
  finalize(k);
  return k;
}

Eigen::MatrixXd symmetric_generator(const Grid& grid, const PotentialSpec& V, KernelScheme scheme) {
  const Eigen::MatrixXd lap = tensor_sum(grid, laplacian_stencil(grid, scheme));
  const Vec<double> rho = ground_state(grid, V);
  const Vec<double> w = (lap * rho).cwiseQuotient(2.0 * rho);
  Eigen::MatrixXd S = 0.5 * lap;
  S.diagonal() -= w;
  return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd generator(const Grid& grid, const PotentialSpec& V, KernelScheme scheme) {
  const Vec<double> rho = ground_state(grid, V);
  return rho.cwiseInverse().asDiagonal() * symmetric_generator(grid, V, scheme) * rho.asDiagonal();
}

Index default_substeps(const Grid& grid, double t) {
  const double h = grid.spacing();
  const double steps = std::ceil(t / (0.5 * h * h));
  return std::max<Index>(1, static_cast<Index>(steps));
}

MarkovKernel kernel_general(const Grid& grid, const PotentialSpec& V, double t, const KernelOptions& opts) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error("kernel time must be positive and finite");
  KernelMethod method = opts.method;
  if (method == KernelMethod::kAuto) {
    method = grid.size() <= kDenseExpmMaxNodes ? KernelMethod::kExpm : KernelMethod::kCrankNicolson;
  }
  const Eigen::MatrixXd S = symmetric_generator(grid, V, opts.scheme);
  const Index m = grid.size();
  Eigen::MatrixXd E;
  if (method == KernelMethod::kExpm) {
    E = (t * S).exp();
  } else {
    const Index steps = opts.substeps > 0 ? opts.substeps : default_substeps(grid, t);
    const double tau = t / static_cast<double>(steps);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd step = (I - 0.5 * tau * S).partialPivLu().solve(I + 0.5 * tau * S);
    // step^steps by repeated squaring
    E = I;
    Index e = steps;
    while (e > 0) {
      if (e & 1) E = E * step;
      e >>= 1;
      if (e > 0) step = step * step;
    }
  }
  E = 0.5 * (E + E.transpose());
  const Vec<double> rho = ground_state(grid, V);
  MarkovKernel k;
  k.grid = grid;
  k.t = t;
  k.K = rho.cwiseInverse().asDiagonal() * E * rho.asDiagonal();
  k.m_weights = stationary_measure(grid, V);
  finalize(k);
  return k;
}

KernelFamily::KernelFamily(const Grid& grid, const PotentialSpec& V, KernelScheme scheme)
    : grid_(grid), rho_(ground_state(grid, V)), m_weights_(stationary_measure(grid, V)) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric_generator(grid, V, scheme));
  if (es.info() != Eigen::Success) throw Error("generator eigendecomposition failed");
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
}

MarkovKernel KernelFamily::at(double t) const {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error("kernel time must be positive and finite");
  // factors below 1e-290 are dropped: they would only feed subnormal
  // products into the matrix multiply, which is slow and changes nothing
  const Vec<double> decay =
      (t * evals_.array()).exp().unaryExpr([](double v) { return v < 1e-290 ? 0.0 : v; }).matrix();
  Eigen::MatrixXd E = evecs_ * decay.asDiagonal() * evecs_.transpose();
  E = 0.5 * (E + E.transpose());
  MarkovKernel k;
  k.grid = grid_;
  k.t = t;
  k.K = rho_.cwiseInverse().asDiagonal() * E * rho_.asDiagonal();
  k.m_weights = m_weights_;
  finalize(k);
  return k;
}

KernelDefects kernel_defects(const MarkovKernel& k) {
  KernelDefects d;
  d.row_sum = (k.K.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const Eigen::MatrixXd flux = k.m_weights.asDiagonal() * k.K;
  d.reversibility = (flux - flux.transpose()).cwiseAbs().maxCoeff();
  d.min_entry = k.K.minCoeff();
  return d;
}

GridFn apply_log(const MarkovKernel& k, const GridFn& g) {
  if (g.size() != k.size()) throw Error("apply_log: kernel and function live on different grids");
  const double gmax = g.values.maxCoeff();
  const Vec<double> w = (g.values.array() - gmax).exp().matrix();
  const Vec<double> s = k.K * w;
  Vec<double> out(k.size());
  for (Index x = 0; x < k.size(); ++x) {
    if (s[x] > 0.0) {
      out[x] = gmax + std::log(s[x]);
      continue;
    }
    // either a zero row or total underflow; redo the row with its own shift
    double local = -std::numeric_limits<double>::infinity();
    for (Index y = 0; y < k.size(); ++y)
      if (k.K(x, y) > 0.0) local = std::max(local, g.values[y]);
    if (!std::isfinite(local)) throw Error("apply_log: kernel row " + std::to_string(x) + " sums to 0");
    double acc = 0.0;
    for (Index y = 0; y < k.size(); ++y)
      if (k.K(x, y) > 0.0) acc += k.K(x, y) * std::exp(g.values[y] - local);
    out[x] = local + std::log(acc);
  }
  return GridFn(k.grid, std::move(out));
}

std::string cache_file_name(const KernelCacheKey& key) {
  std::ostringstream os;
  os << "kernel_d" << key.grid.dim() << "_N" << key.grid.points_per_axis() << "_" << std::hex
     << fnv1a(reinterpret_cast<const char*>(&key.vhash), sizeof(key.vhash)) << "_"
     << std::bit_cast<std::uint64_t>(key.t) << "_" << std::bit_cast<std::uint64_t>(key.grid.side()) << std::dec
     << "_s" << key.substeps << "_" << static_cast<int>(key.scheme) << static_cast<int>(key.method) << ".bin";
  return os.str();
}

void write_kernel_cache(const std::filesystem::path& path, const KernelCacheKey& key, const Eigen::MatrixXd& K) {
  const std::string payload = encode_payload(K);
  std::string header;
  header.append(kMagic, 8);
  put_u32(header, kCacheVersion);
  put_u32(header, static_cast<std::uint32_t>(key.grid.dim()));
  put_u32(header, static_cast<std::uint32_t>(key.grid.points_per_axis()));
  put_u32(header, static_cast<std::uint32_t>(key.substeps));
  put_f64(header, key.grid.side());
  put_f64(header, key.t);
  put_u64(header, key.vhash);
  put_u64(header, fnv1a(payload.data(), payload.size()));
  put_u32(header, static_cast<std::uint32_t>(key.scheme));
  put_u32(header, static_cast<std::uint32_t>(key.method));
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write kernel cache " + tmp.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error("cannot write kernel cache " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<Eigen::MatrixXd> read_kernel_cache(const std::filesystem::path& path, const KernelCacheKey& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const Index m = key.grid.size();
  const std::size_t expected = kHeaderBytes + static_cast<std::size_t>(m * m) * 8;
  if (bytes.size() != expected) return std::nullopt;
  const char* h = bytes.data();
  if (std::memcmp(h, kMagic, 8) != 0) return std::nullopt;
  if (get_u32(h + 8) != kCacheVersion) return std::nullopt;
  if (get_u32(h + 12) != static_cast<std::uint32_t>(key.grid.dim())) return std::nullopt;
  if (get_u32(h + 16) != static_cast<std::uint32_t>(key.grid.points_per_axis())) return std::nullopt;
  if (get_u32(h + 20) != static_cast<std::uint32_t>(key.substeps)) return std::nullopt;
  if (get_f64(h + 24) != key.grid.side()) return std::nullopt;
  if (get_f64(h + 32) != key.t) return std::nullopt;
  if (get_u64(h + 40) != key.vhash) return std::nullopt;
  if (get_u64(h + 48) != fnv1a(h + kHeaderBytes, bytes.size() - kHeaderBytes)) return std::nullopt;
  if (get_u32(h + 56) != static_cast<std::uint32_t>(key.scheme)) return std::nullopt;
  if (get_u32(h + 60) != static_cast<std::uint32_t>(key.method)) return std::nullopt;
  Eigen::MatrixXd K(m, m);
  const char* p = h + kHeaderBytes;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j, p += 8) K(i, j) = get_f64(p);
  if (!K.allFinite()) return std::nullopt;
  return K;
}

MarkovKernel cached_kernel(const Grid& grid, const PotentialSpec& V, double t, const KernelOptions& opts,
                           std::optional<std::filesystem::path> cache_dir) {
  if (!cache_dir) {
    if (const char* env = std::getenv("TS_CACHE_DIR"); env != nullptr && *env != '\0') cache_dir = env;
  }
  if (!cache_dir) return kernel_general(grid, V, t, opts);

  KernelCacheKey key{grid, t, V.hash(), opts.substeps, opts.scheme, opts.method};
  std::filesystem::create_directories(*cache_dir);
  const std::filesystem::path path = *cache_dir / cache_file_name(key);
  if (auto K = read_kernel_cache(path, key)) {
    MarkovKernel k;
    k.grid = grid;
    k.t = t;
    k.K = std::move(*K);
    k.m_weights = stationary_measure(grid, V);
    const KernelDefects d = kernel_defects(k);
    if (d.min_entry >= 0.0 && d.row_sum <= kRowSumTol && d.reversibility <= kReversibilityTol) return k;
  }
  MarkovKernel k = kernel_general(grid, V, t, opts);
  write_kernel_cache(path, key, k.K);
  return k;
}

}  // namespace ts
