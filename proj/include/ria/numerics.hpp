#pragma once

// Minimal dense linear algebra and nonlinearity kernel. Everything is
// double precision and CPU-only; shapes are checked at call boundaries.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ria {

using Vector = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline void check_finite(const Vector& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::runtime_error(std::string("non-finite value in ") + what);
}

/// result_i = sum_j W(i,j) * x_j + b_i
inline Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
  if (w.cols != x.size() || w.rows != b.size())
    throw std::invalid_argument("affine: shape mismatch, W is " + std::to_string(w.rows) + "x" +
                                std::to_string(w.cols) + ", x has " + std::to_string(x.size()) +
                                ", b has " + std::to_string(b.size()));
  Vector out(b);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* wi = w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) acc += wi[j] * x[j];
    out[i] += acc;
  }
  return out;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline Vector sigmoid(Vector v) {
  for (double& z : v) z = sigmoid(z);
  return v;
}

inline Vector tanh(Vector v) {
  for (double& z : v) z = std::tanh(z);
  return v;
}

/// Softmax with max-subtraction; the result sums to 1 exactly up to rounding.
inline Vector softmax(const Vector& s) {
  if (s.empty()) throw std::invalid_argument("softmax: empty input");
  double mx = s[0];
  for (double z : s) mx = std::max(mx, z);
  Vector p(s.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    p[j] = std::exp(s[j] - mx);
    sum += p[j];
  }
  for (double& z : p) z /= sum;
  return p;
}

/// Smallest index attaining the maximum (deterministic tie-break).
inline std::size_t argmax(const Vector& s) {
  if (s.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t j = 1; j < s.size(); ++j)
    if (s[j] > s[best]) best = j;
  return best;
}

// Splitmix64: a fixed 64-bit generator with a single word of state.
// state' = state + 0x9E3779B97F4A7C15, output = finalizer(state').
// Identical seeds give identical streams on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// uniform in [0, 1)
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// standard normal via Box-Muller (two fresh uniforms per draw, no caching)
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// uniform index in [0, n)
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("SeededRng::index: n must be positive");
    return static_cast<std::size_t>(next_u64() % n);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a master seed. Each consumer
/// (init, shuffling, ordering, dropout, ...) gets its own stream id so
/// draws in one consumer never shift another's.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id) {
  std::uint64_t z = master ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace ria
