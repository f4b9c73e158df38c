#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "trurm/common.hpp"

namespace testutil {

using trurm::Complex;
using trurm::Series;

/// O(n^2) DFT; independent of the library FFT.
inline std::vector<Complex> naive_dft(const Series& x) {
  const std::size_t n = x.size();
  std::vector<Complex> X(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * Complex{std::cos(a), std::sin(a)};
    }
    X[k] = acc;
  }
  return X;
}

/// Energy of the bins whose frequency (folded to [0, fs/2]) lies in [lo, hi].
inline double band_energy(const Series& x, double fs, double lo, double hi) {
  const auto X = naive_dft(x);
  const std::size_t n = x.size();
  double e = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t kk = k <= n / 2 ? k : n - k;
    const double f = static_cast<double>(kk) * fs / static_cast<double>(n);
    if (f >= lo && f <= hi) e += std::norm(X[k]);
  }
  return e / static_cast<double>(n);
}

inline double energy(const Series& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double rel_err(const Series& a, const Series& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline Series tone(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0) {
  Series x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * M_PI * f * static_cast<double>(i) / fs + phase);
  return x;
}

inline Series add(const Series& a, const Series& b) {
  Series out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Series gaussian_noise(std::size_t n, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  Series x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

/// Peak frequency of |DFT| restricted to [lo, hi] (bin resolution).
inline double peak_frequency(const Series& x, double fs, double lo, double hi) {
  const auto X = naive_dft(x);
  const std::size_t n = x.size();
  double best = -1.0;
  double f_best = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (f < lo || f > hi) continue;
    if (std::abs(X[k]) > best) {
      best = std::abs(X[k]);
      f_best = f;
    }
  }
  return f_best;
}

}  // namespace testutil
