#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfedgr {

// Error categories used across the library.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ContractViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Small, owning, value-semantic.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  std::span<double> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }

  void set_row(int r, std::span<const double> v) {
    std::copy(v.begin(), v.end(), data.begin() + static_cast<size_t>(r) * cols);
  }

  bool operator==(const Matrix& o) const = default;
};

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(std::span<const double>(m.data)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline uint64_t mix64(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stateless sub-seed derivation: same (master, tag, a, b) always yields the
// same seed, independent of how many other streams were derived before.
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : tag) h = (h ^ c) * 1099511628211ull;
  uint64_t x = mix64(master ^ h);
  x = mix64(x ^ a);
  x = mix64(x ^ b);
  return x;
}

// Seeded RNG with portable distributions. mt19937_64 output is standardized,
// and the distributions below are hand-rolled so streams are reproducible
// across platforms and standard libraries.
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection.
  uint64_t below(uint64_t n) {
    uint64_t t = (-n) % n;  // 2^64 mod n
    uint64_t r = engine_();
    while (r < t) r = engine_();
    return r % n;
  }

  // Standard normal, Box-Muller.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale) {
    double u = uniform();
    while (u == 0.0) u = uniform();
    double w = u - 0.5;  // (-0.5, 0.5)
    double s = w < 0 ? -1.0 : 1.0;
    return -scale * s * std::log(1.0 - 2.0 * std::abs(w));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

// First `count` entries of a seeded partial Fisher-Yates over [0, n).
inline std::vector<int> sample_without_replacement(int n, int count, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < count; ++i) {
    int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace cfedgr
